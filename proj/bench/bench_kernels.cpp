// Serial vs OpenMP timings for the hot kernels. Prints one line per kernel:
//   name  serial_ms  parallel_ms  speedup  threads
// Usage: bench_kernels [N=256] [reps=20]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "ovma/exact_solutions.hpp"
#include "ovma/ma_solver.hpp"
#include "ovma/tensor_core.hpp"

using namespace ovma;

namespace {

template <class F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double s, double p) {
  std::printf("%-22s %10.3f %10.3f %7.2fx %3d\n", name, s, p, s / p, omp_get_max_threads());
}

}  // namespace

int main(int argc, char** argv) {
  const int N = argc > 1 ? std::atoi(argv[1]) : 256;
  const int reps = argc > 2 ? std::atoi(argv[2]) : 20;

  const GridPtr grid = discretize(make_ellipse_domain(EllipsoidSpec::ellipse(M_SQRT2, 1.0)), N);
  const EllipsoidSpec spec = EllipsoidSpec::ellipse(M_SQRT2, 1.0);
  const std::vector<double> u = sample_on_grid(*grid, [&](Vec2 p) {
    const double x[2] = {p.x, p.y};
    return evaluate(spec, x).u;
  });
  const JacobianPattern pat = jacobian_pattern(*grid);
  std::vector<double> r(u.size()), vals(pat.cols.size());

  std::printf("# N=%d unknowns=%d reps=%d\n", N, grid->size(), reps);
  std::printf("%-22s %10s %10s %8s %3s\n", "kernel", "serial_ms", "omp_ms", "speedup", "thr");
  for (double sharp : {1e3, 0.0}) {
    report(sharp > 0 ? "residual(soft)" : "residual(exact)",
           best_ms(reps, [&] { residual_serial(*grid, u, sharp, r); }),
           best_ms(reps, [&] { residual_parallel(*grid, u, sharp, r); }));
  }
  report("jacobian(soft)", best_ms(reps, [&] { jacobian_serial(*grid, pat, u, 1e3, r, vals); }),
         best_ms(reps, [&] { jacobian_parallel(*grid, pat, u, 1e3, r, vals); }));
  for (int n : {3, 5}) {
    const int trials = n == 3 ? 2000 : 300;
    const double s = best_ms(3, [&] { (void)identity_sweep_serial(n, trials, 7); });
    const double p = best_ms(3, [&] { (void)identity_sweep(n, trials, 7); });
    report(n == 3 ? "identity_sweep(n=3)" : "identity_sweep(n=5)", s, p);
  }
  SolveOptions so;
  so.parallel = false;
  const double s = best_ms(1, [&] { (void)solve(grid, so); });
  so.parallel = true;
  const double p = best_ms(1, [&] { (void)solve(grid, so); });
  report("solve", s, p);
}
