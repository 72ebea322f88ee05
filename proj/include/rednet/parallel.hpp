#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace rednet {

/// Run fn(0..count-1) on up to `threads` workers. Tasks must write only to
/// disjoint output slots; results are then identical for any worker count.
/// If tasks throw, the exception of the lowest task index is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    threads = std::max(1, threads);
    const int workers = static_cast<int>(std::min<std::size_t>(count, static_cast<std::size_t>(threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::vector<std::pair<std::size_t, std::exception_ptr>> errors;
    auto body = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                errors.emplace_back(i, std::current_exception());
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (!errors.empty()) {
        auto first = std::min_element(errors.begin(), errors.end(),
                                      [](const auto& a, const auto& b) { return a.first < b.first; });
        std::rethrow_exception(first->second);
    }
}

}  // namespace rednet
