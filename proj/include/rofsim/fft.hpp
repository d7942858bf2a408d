#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>

namespace rofsim {

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

namespace detail {
/// One-time backend setup (thread-safe planner).
void init_fft_backend();

template <typename Scalar>
Eigen::FFT<Scalar>& fft_engine() {
    init_fft_backend();
    thread_local Eigen::FFT<Scalar> engine;
    return engine;
}
}  // namespace detail

/// Unscaled forward DFT.
template <typename Derived>
ComplexVector<typename Derived::RealScalar> fft(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::RealScalar;
    ComplexVector<Scalar> in = x;
    ComplexVector<Scalar> out(in.size());
    detail::fft_engine<Scalar>().fwd(out, in);
    return out;
}

/// Inverse DFT scaled by 1/N, so ifft(fft(x)) == x.
template <typename Derived>
ComplexVector<typename Derived::RealScalar> ifft(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::RealScalar;
    ComplexVector<Scalar> in = x;
    ComplexVector<Scalar> out(in.size());
    detail::fft_engine<Scalar>().inv(out, in);
    return out;
}

/// Signed frequency of DFT bin `k` of an `n`-point transform at rate `fs`.
template <typename Scalar>
inline Scalar bin_frequency(Eigen::Index k, Eigen::Index n, Scalar fs) {
    const Eigen::Index signed_k = (k < (n + 1) / 2) ? k : k - n;
    return Scalar(signed_k) * fs / Scalar(n);
}

/// Bin index (0..n-1) closest to signed frequency `f`.
template <typename Scalar>
inline Eigen::Index bin_index(Scalar f, Eigen::Index n, Scalar fs) {
    auto k = static_cast<Eigen::Index>(std::llround(f / fs * Scalar(n)));
    k %= n;
    if (k < 0) k += n;
    return k;
}

}  // namespace rofsim
