#include "rofsim/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace rofsim::detail {

void init_fft_backend() {
    static std::once_flag once;
    std::call_once(once, [] { fftw_make_planner_thread_safe(); });
}

}  // namespace rofsim::detail
