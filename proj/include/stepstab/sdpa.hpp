#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "conic.hpp"
#include "sdp.hpp"
#include "types.hpp"

// SDPA sparse format (.dat-s). The dual form  sum_i y_i F_i - F_0 >= 0  is
// written with F_0 = C_b, F_i = -A_bi for each matrix block, and one trailing
// diagonal block holding the linear rows (F_0 = lower bound, F_i = coefficient).

namespace stepstab::sdpa {

struct Document {
  conic::Problem problem;
  Vector objective;
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  Index mat, block, i, j;
  double value;
};

inline void push_upper(std::vector<Entry>& out, Index mat, Index block, const Matrix& m, double sign) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = i; j < m.cols(); ++j)
      if (m(i, j) != 0.0) out.push_back({mat, block, i + 1, j + 1, sign * m(i, j)});
}

}  // namespace detail

inline std::string to_string(const conic::Problem& p, const Vector& objective = Vector()) {
  if (p.lmis.empty() && p.rows.empty()) throw Error("sdpa: problem has no constraints");
  if (objective.size() != 0 && objective.size() != p.num_vars)
    throw DimensionError("sdpa: objective length differs from the number of variables");
  const Index nblocks = static_cast<Index>(p.lmis.size()) + (p.rows.empty() ? 0 : 1);
  std::ostringstream os;
  os << p.num_vars << "\n" << nblocks << "\n";
  for (std::size_t b = 0; b < p.lmis.size(); ++b) os << (b ? " " : "") << p.lmis[b].dim();
  if (!p.rows.empty()) os << (p.lmis.empty() ? "" : " ") << -static_cast<Index>(p.rows.size());
  os << "\n";
  for (Index i = 0; i < p.num_vars; ++i)
    os << (i ? " " : "") << detail::num(objective.size() ? objective(i) : 0.0);
  os << "\n";

  std::vector<detail::Entry> entries;
  for (std::size_t b = 0; b < p.lmis.size(); ++b) {
    const Index blk = static_cast<Index>(b) + 1;
    detail::push_upper(entries, 0, blk, p.lmis[b].constant, 1.0);
    for (const auto& [i, Ai] : p.lmis[b].terms) detail::push_upper(entries, i + 1, blk, Ai, -1.0);
  }
  if (!p.rows.empty()) {
    const Index blk = static_cast<Index>(p.lmis.size()) + 1;
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
      const Index d = static_cast<Index>(r) + 1;
      if (p.rows[r].lower != 0.0) entries.push_back({0, blk, d, d, p.rows[r].lower});
      for (const auto& [i, a] : p.rows[r].coeffs)
        if (a != 0.0) entries.push_back({i + 1, blk, d, d, a});
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.mat, a.block, a.i, a.j) < std::tie(b.mat, b.block, b.i, b.j);
  });
  for (const auto& e : entries)
    os << e.mat << " " << e.block << " " << e.i << " " << e.j << " " << detail::num(e.value) << "\n";
  return os.str();
}

inline void write(const std::string& path, const conic::Problem& p, const Vector& objective = Vector()) {
  const std::string text = to_string(p, objective);
  std::ofstream f(path);
  if (!f) throw IoError("sdpa: cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("sdpa: write to " + path + " failed");
}

inline void export_problem(const FeasibilityProblem& fp, const std::string& path) { write(path, fp.conic); }

inline Document parse(const std::string& text) {
  std::string body;
  std::istringstream lines(text);
  std::string line;
  bool header = true;
  while (std::getline(lines, line)) {
    if (header && !line.empty() && (line[0] == '"' || line[0] == '*')) continue;
    header = false;
    for (char& ch : line)
      if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
    body += line;
    body += '\n';
  }
  std::istringstream in(body);
  auto bad = [](const std::string& what) { return IoError("sdpa: malformed input, " + what); };
  Index m = 0, nblocks = 0;
  if (!(in >> m) || m < 0) throw bad("number of variables");
  if (!(in >> nblocks) || nblocks < 1) throw bad("number of blocks");
  std::vector<Index> sizes(static_cast<std::size_t>(nblocks));
  for (auto& s : sizes)
    if (!(in >> s) || s == 0) throw bad("block structure");
  Document doc;
  doc.objective.resize(m);
  for (Index i = 0; i < m; ++i) {
    std::string tok;
    if (!(in >> tok)) throw bad("objective vector");
    doc.objective(i) = std::stod(tok);
  }
  auto& p = doc.problem;
  p.num_vars = m;
  // Matrix blocks and at most one diagonal block.
  std::vector<std::map<Index, Matrix>> coeff(static_cast<std::size_t>(nblocks));
  Index lp_block = -1;
  for (Index b = 0; b < nblocks; ++b)
    if (sizes[static_cast<std::size_t>(b)] < 0) {
      if (lp_block >= 0) throw bad("more than one diagonal block");
      lp_block = b;
    }
  Index mat, blk, i, j;
  std::string tok;
  while (in >> mat) {
    if (!(in >> blk >> i >> j >> tok)) throw bad("truncated entry");
    if (mat < 0 || mat > m || blk < 1 || blk > nblocks) throw bad("entry index out of range");
    const Index b = blk - 1;
    const Index n = std::abs(sizes[static_cast<std::size_t>(b)]);
    if (i < 1 || j < 1 || i > n || j > n) throw bad("entry position out of range");
    if (b == lp_block && i != j) throw bad("off-diagonal entry in a diagonal block");
    const double v = std::stod(tok);
    auto& mp = coeff[static_cast<std::size_t>(b)];
    auto it = mp.find(mat);
    if (it == mp.end()) it = mp.emplace(mat, b == lp_block ? Matrix::Zero(n, 1) : Matrix::Zero(n, n)).first;
    if (b == lp_block) {
      it->second(i - 1, 0) = v;
    } else {
      it->second(i - 1, j - 1) = v;
      it->second(j - 1, i - 1) = v;
    }
  }
  if (!in.eof()) throw bad("trailing garbage");
  for (Index b = 0; b < nblocks; ++b) {
    const auto& mp = coeff[static_cast<std::size_t>(b)];
    const Index n = std::abs(sizes[static_cast<std::size_t>(b)]);
    if (b == lp_block) {
      p.rows.resize(static_cast<std::size_t>(n));
      for (const auto& [k, col] : mp)
        for (Index r = 0; r < n; ++r) {
          if (col(r, 0) == 0.0) continue;
          if (k == 0)
            p.rows[static_cast<std::size_t>(r)].lower = col(r, 0);
          else
            p.rows[static_cast<std::size_t>(r)].coeffs.emplace_back(k - 1, col(r, 0));
        }
      continue;
    }
    conic::AffineLmi l;
    l.constant = Matrix::Zero(n, n);
    for (const auto& [k, mtx] : mp) {
      if (k == 0)
        l.constant = mtx;
      else
        l.terms.emplace_back(k - 1, -mtx);
    }
    p.lmis.push_back(std::move(l));
  }
  if (lp_block >= 0 && lp_block != nblocks - 1) throw bad("the diagonal block must come last");
  return doc;
}

inline Document read(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("sdpa: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

/// Coefficient matrix of variable i in a block; zero when absent.
inline Matrix coefficient(const conic::AffineLmi& l, Index i) {
  for (const auto& [k, A] : l.terms)
    if (k == i) return A;
  return Matrix::Zero(l.dim(), l.dim());
}

}  // namespace stepstab::sdpa
