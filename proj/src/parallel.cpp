#include "phonon/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace phonon {

FanOut serial_fan_out()
{
    return [](std::size_t n, const std::function<void(std::size_t)>& task) {
        for (std::size_t i = 0; i < n; ++i)
            task(i);
    };
}

FanOut thread_fan_out(unsigned threads)
{
    if (threads <= 1)
        return serial_fan_out();
    return [threads](std::size_t n, const std::function<void(std::size_t)>& task) {
        std::vector<std::exception_ptr> errors(n);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    task(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const std::size_t count = std::min<std::size_t>(threads, n);
        std::vector<std::thread> pool;
        pool.reserve(count);
        for (std::size_t k = 0; k < count; ++k)
            pool.emplace_back(worker);
        for (std::thread& t : pool)
            t.join();
        for (const std::exception_ptr& e : errors)
            if (e)
                std::rethrow_exception(e);
    };
}

unsigned default_thread_count() { return std::max(1u, std::thread::hardware_concurrency()); }

} // namespace phonon
