#pragma once

#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mkv {

/// --threads value if positive, else MKV_THREADS from the environment, else 1.
inline int resolve_threads(int from_cli) {
    if (from_cli > 0) return from_cli;
    if (const char* env = std::getenv("MKV_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    return 1;
}

/// Run fn(i) for i in [0, count) on the given number of threads, strided so
/// the assignment of indices to threads is deterministic.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::size_t nt = std::min<std::size_t>(std::size_t(threads), count);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}
