#pragma once

#include <exception>

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define LFR_HAS_MXCSR 1
#endif

namespace lfr::detail {

// Runs fn(i) for i in [0, n) across OpenMP threads (static schedule) and
// rethrows the first exception on the calling thread.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        try {
            fn(i);
        } catch (...) {
#pragma omp critical(lfr_parallel_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

// Flushes denormal floats to zero on the current thread while alive. Deep
// backward passes produce tiny gradients whose denormal arithmetic runs in
// microcode, orders of magnitude slower than normal values.
class FlushDenormals {
public:
    FlushDenormals() {
#ifdef LFR_HAS_MXCSR
        saved_ = _mm_getcsr();
        _mm_setcsr(saved_ | 0x8040u);   // FTZ | DAZ
#endif
    }
    ~FlushDenormals() {
#ifdef LFR_HAS_MXCSR
        _mm_setcsr(saved_);
#endif
    }
    FlushDenormals(const FlushDenormals&) = delete;
    FlushDenormals& operator=(const FlushDenormals&) = delete;

private:
    unsigned saved_ = 0;
};

} // namespace lfr::detail
