#include <ostream>

#include "dlrm/socp.hpp"

namespace dlrm::socp {

// Conic benchmark text dump. Row order: equalities (zero cone), inequalities
// (nonpositive cone), then each second-order cone block as (t, u) rows.
void write_cbf(const ConicProgram& prog, std::ostream& os) {
  os << "VER\n3\n\n";
  os << "OBJSENSE\nMIN\n\n";
  os << "VAR\n" << prog.num_variables() << " 1\nF " << prog.num_variables() << "\n\n";

  int obj_nnz = 0;
  for (double c : prog.objective())
    if (c != 0.0) ++obj_nnz;
  if (obj_nnz > 0) {
    os << "OBJACOORD\n" << obj_nnz << "\n";
    for (int j = 0; j < prog.num_variables(); ++j)
      if (prog.objective()[size_t(j)] != 0.0) os << j << " " << prog.objective()[size_t(j)] << "\n";
    os << "\n";
  }
  if (prog.objective_constant() != 0.0)
    os << "OBJBCOORD\n" << prog.objective_constant() << "\n\n";

  struct Row {
    const LinExpr* e;
  };
  std::vector<Row> rows;
  struct ConeDecl {
    const char* kind;
    int size;
  };
  std::vector<ConeDecl> cones;
  for (const auto& [e, tag] : prog.equalities()) {
    (void)tag;
    rows.push_back({&e});
    cones.push_back({"L=", 1});
  }
  for (const auto& [e, tag] : prog.inequalities()) {
    (void)tag;
    rows.push_back({&e});
    cones.push_back({"L-", 1});
  }
  for (const auto& [blk, tag] : prog.cones()) {
    (void)tag;
    rows.push_back({&blk.t});
    for (const auto& u : blk.u) rows.push_back({&u});
    cones.push_back({"Q", 1 + int(blk.u.size())});
  }

  os << "CON\n" << rows.size() << " " << cones.size() << "\n";
  for (const auto& c : cones) os << c.kind << " " << c.size << "\n";
  os << "\n";

  int nnz = 0, bnz = 0;
  for (const auto& r : rows) {
    nnz += int(r.e->terms.size());
    if (r.e->constant != 0.0) ++bnz;
  }
  os << "ACOORD\n" << nnz << "\n";
  for (size_t i = 0; i < rows.size(); ++i)
    for (const auto& t : rows[i].e->terms) os << i << " " << t.var << " " << t.coeff << "\n";
  os << "\n";
  if (bnz > 0) {
    os << "BCOORD\n" << bnz << "\n";
    for (size_t i = 0; i < rows.size(); ++i)
      if (rows[i].e->constant != 0.0) os << i << " " << rows[i].e->constant << "\n";
    os << "\n";
  }
}

}  // namespace dlrm::socp
