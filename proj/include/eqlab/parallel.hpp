#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace eqlab {

// Runs fn(i) for i in [0, n) on up to `threads` workers.  Jobs must write only
// to their own slot; callers reduce afterwards in index order, so results do
// not depend on the thread count.  The first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
    if(workers <= 1) {
        for(std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for(;;) {
            std::size_t i = next.fetch_add(1);
            if(i >= n)
                return;
            try {
                fn(i);
            }
            catch(...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if(!error)
                    error = std::current_exception();
                next.store(n);
            }
        }
    };
    std::vector<std::thread> pool;
    for(std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(work);
    for(auto& t : pool)
        t.join();
    if(error)
        std::rethrow_exception(error);
}

} // namespace eqlab
