#include <benchmark/benchmark.h>

#include "dlrm/socp.hpp"

namespace {

using dlrm::socp::ConicProgram;
using dlrm::socp::LinExpr;

// Portfolio-style SOCP: n assets, budget row, risk ball.
ConicProgram make_program(int n) {
  ConicProgram prog;
  std::vector<int> vars;
  for (int i = 0; i < n; ++i) vars.push_back(prog.add_variable("x" + std::to_string(i)));
  LinExpr budget;
  budget.constant = -1.0;
  for (int i = 0; i < n; ++i) {
    budget.add(vars[size_t(i)], 1.0);
    prog.add_objective_term(vars[size_t(i)], -(1.0 + 0.01 * i));
    prog.add_inequality(LinExpr::of(vars[size_t(i)], -1.0), "nn" + std::to_string(i));
  }
  prog.add_equality(budget, "budget");
  dlrm::socp::SocBlock risk;
  risk.t.constant = 0.3;
  for (int i = 0; i < n; ++i)
    risk.u.push_back(LinExpr::of(vars[size_t(i)], 0.05 * (1 + i % 5)));
  prog.add_soc(std::move(risk), "risk");
  return prog;
}

void BM_SocpSolve(benchmark::State& state) {
  auto prog = make_program(int(state.range(0)));
  for (auto _ : state) {
    auto sol = dlrm::socp::solve(prog);
    benchmark::DoNotOptimize(sol.objective);
  }
}
BENCHMARK(BM_SocpSolve)->Arg(10)->Arg(40)->Arg(120);

}  // namespace

BENCHMARK_MAIN();
