// Runs every relaxation scheme on the cubic example and on one random linear
// instance, printing objective, terminal reason and (for the linear case) the
// infeasibility measure.

#include "bilevel/examples.hpp"
#include "bilevel/gen.hpp"
#include "bilevel/relaxation.hpp"

#include <cstdio>

using namespace bilevel;

int main() {
  const auto e = example_cubic_wolfe_gap();
  std::printf("min -x - y  s.t. x <= 1, y in argmin { y^3 + y : y >= x }   (optimum -2 at (1,1))\n\n");
  for (auto scheme : all_schemes()) {
    const auto r = run(e.bp, scheme);
    std::printf("  %-7s %-13s obj %12.6f  x %9.4f  y %12.4f\n", to_string(scheme), to_string(r.reason), r.objective,
                r.x[0], r.y[0]);
  }

  const auto lin = gen_linear(2, 3, 3, 3, 0.5, 1);
  const auto oracle = oracle_global(lin);
  std::printf("\nrandom linear instance (n,l,m,p) = (2,3,3,3), seed 1, global optimum %.6f\n\n", oracle.value);
  for (auto scheme : all_schemes()) {
    const auto r = run(lin, scheme);
    std::printf("  %-7s %-13s obj %12.6f  infeasibility %.2e  %.3f s\n", to_string(scheme), to_string(r.reason),
                r.objective, r.infeasibility ? r.infeasibility->total : kInf, r.seconds);
  }
}
