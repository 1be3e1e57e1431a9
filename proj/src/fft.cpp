#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

#include "sinc/error.hpp"

namespace sinc::detail {
namespace {

// FFTW planning is not thread-safe; execution through the new-array interface
// is. Plans are built once per length under a mutex and then shared.
// FFTW_ESTIMATE keeps the chosen algorithm, and therefore the rounding,
// identical from run to run.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.inverse);
    }
  }

  PlanPair get(std::size_t n) {
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(n); it != plans_.end()) return it->second;
    const int len = static_cast<int>(n);
    double* real = fftw_alloc_real(n);
    fftw_complex* cplx = fftw_alloc_complex(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair p;
    p.forward = fftw_plan_dft_r2c_1d(len, real, cplx, flags);
    p.inverse = fftw_plan_dft_c2r_1d(len, cplx, real, flags | FFTW_DESTROY_INPUT);
    fftw_free(real);
    fftw_free(cplx);
    if (p.forward == nullptr || p.inverse == nullptr) {
      throw InvalidState("FFTW failed to plan a transform of length " + std::to_string(n));
    }
    plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, PlanPair> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  if (n < 2 || out.size() != n / 2 + 1) throw InvalidInput("rfft: bad buffer sizes");
  const PlanPair p = cache().get(n);
  // r2c does not modify its input.
  fftw_execute_dft_r2c(p.forward, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void irfft(std::span<std::complex<double>> in, std::span<double> out) {
  const std::size_t n = out.size();
  if (n < 2 || in.size() != n / 2 + 1) throw InvalidInput("irfft: bad buffer sizes");
  const PlanPair p = cache().get(n);
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(in.data()), out.data());
}

}  // namespace sinc::detail
