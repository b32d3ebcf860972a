#pragma once

// Segments of the positive half line and their finite partitions, all in
// exact rational arithmetic: regularity predicates, dyadic and joint
// refinements, the subpartition regularity bound with its certificate,
// the arbitrary-irregularity construction, and the doubling decomposition
// used to get positivity of the limit kernels.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rvl/rational.hpp"

namespace rvl {

// Closed segment [m, M].  Kernel-facing code needs m > 0 (heights), but the
// partition layer accepts m == 0 so that textbook partitions of [0,1] work.
struct segment {
  rational m, M;

  segment() = default;
  segment(rational lo, rational hi) : m(lo), M(hi) {
    if (!(m < M)) throw std::invalid_argument("segment: need m < M");
    if (m < rational(0)) throw std::invalid_argument("segment: need m >= 0");
  }

  rational length() const { return M - m; }

  // Aspect ratio M/m; only defined away from zero.
  rational rho() const {
    if (!(rational(0) < m)) throw std::domain_error("segment: rho needs m > 0");
    return M / m;
  }
};

inline bool operator==(const segment& a, const segment& b) { return a.m == b.m && a.M == b.M; }

// Contiguous ordered partition: pieces[k].M == pieces[k+1].m.
struct partition {
  std::vector<segment> pieces;

  partition() = default;
  explicit partition(std::vector<segment> p) : pieces(std::move(p)) { validate(); }

  std::size_t size() const { return pieces.size(); }
  segment whole() const {
    if (pieces.empty()) throw std::logic_error("partition: empty");
    return segment(pieces.front().m, pieces.back().M);
  }

  rational sup_length() const {
    rational s = pieces.front().length();
    for (const auto& j : pieces) s = std::max(s, j.length());
    return s;
  }
  rational inf_length() const {
    rational s = pieces.front().length();
    for (const auto& j : pieces) s = std::min(s, j.length());
    return s;
  }

  // Breakpoints m(j_1), M(j_1), ..., M(j_K); size() + 1 entries.
  std::vector<rational> breaks() const {
    std::vector<rational> b;
    b.reserve(pieces.size() + 1);
    b.push_back(pieces.front().m);
    for (const auto& j : pieces) b.push_back(j.M);
    return b;
  }

  static partition from_breaks(const std::vector<rational>& b) {
    if (b.size() < 2) throw std::invalid_argument("partition: need >= 2 breakpoints");
    std::vector<segment> p;
    p.reserve(b.size() - 1);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) p.emplace_back(b[i], b[i + 1]);
    return partition(std::move(p));
  }

private:
  void validate() const {
    if (pieces.empty()) throw std::invalid_argument("partition: empty");
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k)
      if (!(pieces[k].M == pieces[k + 1].m))
        throw std::invalid_argument("partition: pieces not contiguous");
  }
};

// 2^n equal pieces; exactly 1-regular by construction.
inline partition make_dyadic(const segment& d, int n) {
  if (n < 0) throw std::invalid_argument("make_dyadic: n >= 0");
  std::int64_t parts = std::int64_t(1) << n;
  std::vector<segment> p;
  p.reserve(parts);
  rational len = d.length();
  rational prev = d.m;
  for (std::int64_t i = 1; i <= parts; ++i) {
    rational next = i == parts ? d.M : d.m + len * rational(i, parts);
    p.emplace_back(prev, next);
    prev = next;
  }
  return partition(std::move(p));
}

// Exact refinement test: every breakpoint of coarse appears in fine.
inline bool refines(const partition& fine, const partition& coarse) {
  if (!(fine.whole() == coarse.whole())) return false;
  auto fb = fine.breaks();
  for (const auto& b : coarse.breaks())
    if (!std::binary_search(fb.begin(), fb.end(), b)) return false;
  return true;
}

struct regularity_result {
  bool lambda_regular;  // sup|j| <= lambda * inf|j|
  bool weakly_regular;  // sup|j| <= lambda * |U(mu)| / |mu|
};

inline regularity_result regularity(const partition& mu, const rational& lambda) {
  if (lambda < rational(1)) throw std::invalid_argument("regularity: lambda >= 1");
  rational sup = mu.sup_length(), inf = mu.inf_length();
  rational mean = mu.whole().length() / rational((std::int64_t)mu.size());
  regularity_result r{sup <= lambda * inf, sup <= lambda * mean};
  // lambda-regular implies weakly regular: sup <= lambda inf <= lambda mean.
  if (r.lambda_regular && !r.weakly_regular) throw std::logic_error("regularity: implication violated");
  return r;
}

// Common refinement of tau and mu that is exactly lambda-regular and refines
// both.  Each joint cell is cut into pieces of length eta with the remainder
// merged into the last piece, so all pieces lie in [eta, 2 eta); guaranteed
// for lambda >= 2, and for smaller lambda exactly when the joint cells divide
// evenly.  The post-condition is asserted either way.
inline partition joint_lambda_refinement(const partition& tau, const partition& mu,
                                         const rational& lambda) {
  if (!(tau.whole() == mu.whole()))
    throw std::invalid_argument("joint_lambda_refinement: different parent segments");
  std::vector<rational> joint = tau.breaks();
  for (const auto& b : mu.breaks()) joint.push_back(b);
  std::sort(joint.begin(), joint.end());
  joint.erase(std::unique(joint.begin(), joint.end()), joint.end());

  rational eta = joint[1] - joint[0];
  for (std::size_t i = 1; i + 1 < joint.size(); ++i) eta = std::min(eta, joint[i + 1] - joint[i]);

  std::vector<rational> out;
  out.push_back(joint.front());
  for (std::size_t i = 0; i + 1 < joint.size(); ++i) {
    rational len = joint[i + 1] - joint[i];
    // k full cuts of eta fit; the last piece absorbs the remainder.
    std::int64_t k = 1;
    while (rational(k + 1) * eta <= len) ++k;
    for (std::int64_t c = 1; c < k; ++c) out.push_back(joint[i] + rational(c) * eta);
    out.push_back(joint[i + 1]);
  }
  partition res = partition::from_breaks(out);
  auto reg = regularity(res, lambda);
  if (!reg.lambda_regular)
    throw std::domain_error("joint_lambda_refinement: cannot reach lambda-regularity (lambda < 2 with uneven cells)");
  if (!refines(res, tau) || !refines(res, mu))
    throw std::logic_error("joint_lambda_refinement: refinement property lost");
  return res;
}

// Union length and minimum of an arbitrary subset of pieces.  The union need
// not be contiguous; |U(nu)| is the sum of lengths, m(U(nu)) the smallest m.
inline rational union_length(const partition& tau, const std::vector<std::size_t>& idx) {
  rational s(0);
  for (auto i : idx) s += tau.pieces.at(i).length();
  return s;
}
inline rational union_min(const partition& tau, const std::vector<std::size_t>& idx) {
  rational m = tau.pieces.at(idx.front()).m;
  for (auto i : idx) m = std::min(m, tau.pieces.at(i).m);
  return m;
}

// Regularity bound for the complement tau1 = tau \ mu of a subset mu:
// returns lambda*|tau1| / (|tau| - lambda*|mu|), certifying exactly that
//   sup_{j in tau1} |j|  <=  bound * |U(tau1)| / |tau1|.
// Pre: tau weakly lambda-regular and lambda*|mu| < |tau| (counts).
struct subpartition_cert {
  rational bound;         // lambda |tau1| / (|tau| - lambda |mu|)
  rational sup_tau1;      // left side of the certificate
  rational rhs;           // bound * |U(tau1)| / |tau1|
};

inline subpartition_cert subpartition_bound(const partition& tau,
                                            const std::vector<std::size_t>& mu_idx,
                                            const rational& lambda) {
  if (!regularity(tau, lambda).weakly_regular)
    throw std::invalid_argument("subpartition_bound: tau not weakly lambda-regular");
  std::vector<char> in_mu(tau.size(), 0);
  for (auto i : mu_idx) in_mu.at(i) = 1;
  rational n_tau((std::int64_t)tau.size()), n_mu((std::int64_t)mu_idx.size());
  if (!(lambda * n_mu < n_tau))
    throw std::invalid_argument("subpartition_bound: need lambda*|mu| < |tau|");

  std::vector<std::size_t> tau1;
  for (std::size_t i = 0; i < tau.size(); ++i)
    if (!in_mu[i]) tau1.push_back(i);

  rational n_tau1((std::int64_t)tau1.size());
  subpartition_cert c;
  c.bound = lambda * n_tau1 / (n_tau - lambda * n_mu);
  c.sup_tau1 = rational(0);
  for (auto i : tau1) c.sup_tau1 = std::max(c.sup_tau1, tau.pieces[i].length());
  c.rhs = c.bound * union_length(tau, tau1) / n_tau1;
  if (!(c.sup_tau1 <= c.rhs)) throw std::logic_error("subpartition_bound: certificate failed");
  return c;
}

// Arbitrary irregularity of subpartitions: a weakly lambda-regular partition
// tau of delta whose prefix tau1 (one long piece, then A short ones) violates
// weak A-regularity with equality:
//     A * |U(tau1)| / |tau1|  ==  omega  ==  sup_{j in tau1} |j|.
// eps is fixed to (lambda-1)/2, which keeps (1+eps)/lambda < 1, and N is the
// smallest integer > A+1 with (N-A-1)(1+eps) >= lambda (N/lambda - 1 - 1/A).
struct irregular_witness {
  partition tau;
  std::size_t tau1_count;  // tau1 = first tau1_count pieces, tau2 the rest
  rational omega;          // length of the long piece after scaling
  rational eps;
  std::int64_t N;          // pieces are indexed 0..N
};

inline irregular_witness counterexample_partition(const segment& delta, std::int64_t A,
                                                  const rational& lambda) {
  if (A < 1) throw std::invalid_argument("counterexample_partition: A >= 1");
  if (!(rational(1) < lambda)) throw std::invalid_argument("counterexample_partition: lambda > 1");
  rational eps = (lambda - rational(1)) / rational(2);
  rational one(1);

  // q_N -> lambda > lambda/(1+eps), so the scan terminates.
  std::int64_t N = A + 2;
  const std::int64_t cap = 1 << 22;
  while (true) {
    rational lhs = rational(N - A - 1) * (one + eps);
    rational rhs = lambda * (rational(N) / lambda - one - one / rational(A));
    if (rhs <= lhs) break;
    if (++N > cap) throw std::runtime_error("counterexample_partition: no feasible N");
  }

  // Piece lengths before scaling: omega, A times omega/A^2, N-A times (1+eps)omega/lambda.
  rational unit_total = one + one / rational(A) + rational(N - A) * (one + eps) / lambda;
  rational omega = delta.length() / unit_total;

  std::vector<segment> pieces;
  pieces.reserve((std::size_t)N + 1);
  rational lo = delta.m;
  auto push = [&](const rational& len) {
    rational hi = lo + len;
    pieces.emplace_back(lo, hi);
    lo = hi;
  };
  push(omega);
  for (std::int64_t i = 0; i < A; ++i) push(omega / rational(A * A));
  for (std::int64_t i = 0; i < N - A - 1; ++i) push((one + eps) * omega / lambda);
  // Close the last piece on M(delta) exactly; its length equals the others.
  pieces.emplace_back(lo, delta.M);
  if (!(pieces.back().length() == (one + eps) * omega / lambda))
    throw std::logic_error("counterexample_partition: scaling failed");

  irregular_witness w{partition(std::move(pieces)), (std::size_t)A + 1, omega, eps, N};

  // Certificates, all exact.  The headline identity is
  //   A * |U(tau1)| / #tau1  ==  omega  ==  sup_{j in tau1} |j|,
  // so tau1 sits exactly at the edge of weak A-regularity and beats every
  // constant below A; tau itself stays weakly lambda-regular (with the true
  // piece count N+1 in the mean).
  std::vector<std::size_t> t1((std::size_t)A + 1);
  for (std::size_t i = 0; i <= (std::size_t)A; ++i) t1[i] = i;
  rational lhs = rational(A) * union_length(w.tau, t1) / rational(A + 1);
  if (!(lhs == omega) || !(w.tau.pieces[0].length() == omega))
    throw std::logic_error("counterexample_partition: equality certificate failed");
  if (!regularity(w.tau, lambda).weakly_regular)
    throw std::logic_error("counterexample_partition: tau not weakly lambda-regular");
  rational mean_t1 = union_length(w.tau, t1) / rational(A + 1);
  if (!((rational(A) - rational(1, 2)) * mean_t1 < omega))
    throw std::logic_error("counterexample_partition: strictness certificate failed");
  return w;
}

// Bisect every piece.  Preserves weak lambda-regularity (sup and mean both
// halve) and the equality certificate of the irregular witness.
inline partition bisect_all(const partition& p) {
  std::vector<segment> out;
  out.reserve(2 * p.size());
  for (const auto& j : p.pieces) {
    rational mid = (j.m + j.M) / rational(2);
    out.emplace_back(j.m, mid);
    out.emplace_back(mid, j.M);
  }
  return partition(std::move(out));
}

// Doubling decomposition of delta with |delta| >= m(delta):
//   [m, 2m], [2m, 4m], ..., [2^n m, M]  with n largest s.t. 2^{n+1} m <= M.
// Every piece j then satisfies m(j) <= |j| <= 3 m(j), certified here.
inline partition doubling_decomposition(const segment& delta) {
  if (!(rational(0) < delta.m)) throw std::domain_error("doubling_decomposition: m > 0");
  if (delta.length() < delta.m)
    throw std::invalid_argument("doubling_decomposition: need |delta| >= m(delta)");
  std::vector<segment> pieces;
  rational lo = delta.m;
  while (lo * rational(4) <= delta.M) {  // next doubled endpoint still leaves a valid tail
    pieces.emplace_back(lo, lo * rational(2));
    lo = lo * rational(2);
  }
  pieces.emplace_back(lo, delta.M);
  for (const auto& j : pieces)
    if (j.length() < j.m || rational(3) * j.m < j.length())
      throw std::logic_error("doubling_decomposition: piece certificate failed");
  partition p(std::move(pieces));
  if (!(p.whole() == delta)) throw std::logic_error("doubling_decomposition: cover failed");
  return p;
}

// Serialization: a partition is its list of breakpoints as "p/q" strings.
inline std::vector<std::string> to_strings(const partition& p) {
  std::vector<std::string> out;
  for (const auto& b : p.breaks()) out.push_back(b.str());
  return out;
}

inline partition partition_from_strings(const std::vector<std::string>& v) {
  std::vector<rational> b;
  b.reserve(v.size());
  for (const auto& s : v) b.push_back(rational::parse(s));
  return partition::from_breaks(b);
}

}  // namespace rvl
