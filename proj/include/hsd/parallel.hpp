#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include <Eigen/Core>

namespace hsd {

/// Runs `body(begin, end)` over contiguous chunks of [0, count). Work items
/// must be independent; the result then does not depend on `threads`.
/// `threads == 0` uses the hardware concurrency.
template <typename Body>
void parallel_for(Eigen::Index count, Body&& body, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    const auto workers = static_cast<Eigen::Index>(std::min<Eigen::Index>(threads, std::max<Eigen::Index>(count, 1)));
    if (workers <= 1) {
        body(Eigen::Index{0}, count);
        return;
    }
    const Eigen::Index chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    for (Eigen::Index w = 0; w < workers; ++w) {
        const Eigen::Index begin = w * chunk;
        const Eigen::Index end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace hsd
