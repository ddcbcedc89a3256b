#include "ita/crf.hpp"

#include <cassert>
#include <cmath>

#include "ita/errors.hpp"

namespace ita {

double score_sequence(const Matrix& emissions, const CrfParams& crf,
                      const std::vector<std::size_t>& labels) {
  const std::size_t n = emissions.rows();
  if (labels.size() != n)
    throw DataError("label sequence length " + std::to_string(labels.size()) +
                    " does not match " + std::to_string(n) + " emission rows");
  double score = crf.start(0, labels[0]) + emissions(0, labels[0]);
  for (std::size_t i = 1; i < n; ++i)
    score += crf.transitions(labels[i - 1], labels[i]) + emissions(i, labels[i]);
  score += crf.end(0, labels[n - 1]);
  return score;
}

ChainTables chain_tables(const Matrix& emissions, const CrfParams& crf) {
  const std::size_t n = emissions.rows();
  const std::size_t L = emissions.cols();
  assert(n >= 1 && L == crf.label_count());

  ChainTables t;
  t.alpha.resize(n, L);
  t.beta.resize(n, L);
  std::vector<double> work(L);

  for (std::size_t b = 0; b < L; ++b) t.alpha(0, b) = crf.start(0, b) + emissions(0, b);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < L; ++b) {
      for (std::size_t a = 0; a < L; ++a) work[a] = t.alpha(i - 1, a) + crf.transitions(a, b);
      t.alpha(i, b) = emissions(i, b) + log_sum_exp(work.data(), L);
    }
  }

  for (std::size_t a = 0; a < L; ++a) t.beta(n - 1, a) = crf.end(0, a);
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b)
        work[b] = crf.transitions(a, b) + emissions(i + 1, b) + t.beta(i + 1, b);
      t.beta(i, a) = log_sum_exp(work.data(), L);
    }
  }

  for (std::size_t b = 0; b < L; ++b) work[b] = t.alpha(n - 1, b) + crf.end(0, b);
  t.log_z = log_sum_exp(work.data(), L);
  return t;
}

double log_partition(const Matrix& emissions, const CrfParams& crf) {
  return chain_tables(emissions, crf).log_z;
}

double nll(const Matrix& emissions, const CrfParams& crf, const std::vector<std::size_t>& gold) {
  return log_partition(emissions, crf) - score_sequence(emissions, crf, gold);
}

ViterbiResult viterbi(const Matrix& emissions, const CrfParams& crf) {
  const std::size_t n = emissions.rows();
  const std::size_t L = emissions.cols();

  Matrix delta(n, L);
  std::vector<std::size_t> backptr((n > 1 ? n - 1 : 0) * L);

  for (std::size_t b = 0; b < L; ++b) delta(0, b) = crf.start(0, b) + emissions(0, b);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t b = 0; b < L; ++b) {
      double best = delta(i - 1, 0) + crf.transitions(0, b);
      std::size_t best_a = 0;
      for (std::size_t a = 1; a < L; ++a) {
        double s = delta(i - 1, a) + crf.transitions(a, b);
        if (s > best) {  // strict: ties keep the lowest label id
          best = s;
          best_a = a;
        }
      }
      delta(i, b) = best + emissions(i, b);
      backptr[(i - 1) * L + b] = best_a;
    }
  }

  double best = delta(n - 1, 0) + crf.end(0, 0);
  std::size_t best_b = 0;
  for (std::size_t b = 1; b < L; ++b) {
    double s = delta(n - 1, b) + crf.end(0, b);
    if (s > best) {
      best = s;
      best_b = b;
    }
  }

  ViterbiResult result;
  result.score = best;
  result.labels.assign(n, 0);
  result.labels[n - 1] = best_b;
  for (std::size_t i = n - 1; i-- > 0;) result.labels[i] = backptr[i * L + result.labels[i + 1]];
  return result;
}

Matrix marginals_from_tables(const ChainTables& tables) {
  const std::size_t n = tables.alpha.rows();
  const std::size_t L = tables.alpha.cols();
  Matrix p(n, L);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < L; ++l)
      p(i, l) = std::exp(tables.alpha(i, l) + tables.beta(i, l) - tables.log_z);
  return p;
}

Matrix posterior_marginals(const Matrix& emissions, const CrfParams& crf) {
  return marginals_from_tables(chain_tables(emissions, crf));
}

CvaResult cva_loss(const Matrix& posteriors_teacher, const Matrix& posteriors_student) {
  if (!posteriors_teacher.same_shape(posteriors_student))
    throw DataError("teacher/student posterior tables differ in shape");
  CvaResult result;
  double teacher_entropy = 0.0;
  for (std::size_t i = 0; i < posteriors_teacher.rows(); ++i) {
    for (std::size_t l = 0; l < posteriors_teacher.cols(); ++l) {
      const double t = posteriors_teacher(i, l);
      result.cross_entropy -= t * std::log(posteriors_student(i, l) + kProbEpsilon);
      teacher_entropy -= t * std::log(t + kProbEpsilon);
    }
  }
  result.kl = result.cross_entropy - teacher_entropy;
  return result;
}

CrfGradients nll_backward(const Matrix& emissions, const CrfParams& crf,
                          const std::vector<std::size_t>& gold, const ChainTables& tables) {
  const std::size_t n = emissions.rows();
  const std::size_t L = emissions.cols();

  CrfGradients g;
  g.d_emissions = marginals_from_tables(tables);
  g.d_transitions.resize(L, L);
  g.d_start.resize(1, L);
  g.d_end.resize(1, L);

  for (std::size_t i = 0; i < n; ++i) g.d_emissions(i, gold[i]) -= 1.0;

  // Expected pairwise counts minus observed transitions.
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t a = 0; a < L; ++a) {
      for (std::size_t b = 0; b < L; ++b) {
        g.d_transitions(a, b) += std::exp(tables.alpha(i - 1, a) + crf.transitions(a, b) +
                                          emissions(i, b) + tables.beta(i, b) - tables.log_z);
      }
    }
    g.d_transitions(gold[i - 1], gold[i]) -= 1.0;
  }

  for (std::size_t l = 0; l < L; ++l) {
    g.d_start(0, l) = std::exp(tables.alpha(0, l) + tables.beta(0, l) - tables.log_z);
    g.d_end(0, l) = std::exp(tables.alpha(n - 1, l) + tables.beta(n - 1, l) - tables.log_z);
  }
  g.d_start(0, gold[0]) -= 1.0;
  g.d_end(0, gold[n - 1]) -= 1.0;
  return g;
}

CrfGradients cva_backward(const Matrix& posteriors_teacher, const Matrix& student_emissions,
                          const CrfParams& crf, const ChainTables& t) {
  const std::size_t n = student_emissions.rows();
  const std::size_t L = student_emissions.cols();
  if (posteriors_teacher.rows() != n || posteriors_teacher.cols() != L)
    throw DataError("teacher posterior table does not match student emissions shape");

  CrfGradients g;
  g.d_emissions.resize(n, L);
  g.d_transitions.resize(L, L);
  g.d_start.resize(1, L);
  g.d_end.resize(1, L);

  // Adjoint seeds: L = -sum teacher * log(s + eps), s = exp(alpha+beta-log_z).
  Matrix d_alpha(n, L);
  Matrix d_beta(n, L);
  double d_log_z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < L; ++l) {
      const double s = std::exp(t.alpha(i, l) + t.beta(i, l) - t.log_z);
      const double dg = -posteriors_teacher(i, l) / (s + kProbEpsilon) * s;
      d_alpha(i, l) = dg;
      d_beta(i, l) = dg;
      d_log_z -= dg;
    }
  }

  // log_z = LSE_b(alpha[n-1][b] + end[b]).
  for (std::size_t b = 0; b < L; ++b) {
    const double w = std::exp(t.alpha(n - 1, b) + crf.end(0, b) - t.log_z);
    d_alpha(n - 1, b) += d_log_z * w;
    g.d_end(0, b) += d_log_z * w;
  }

  // beta[i][a] = LSE_b(T[a][b] + em[i+1][b] + beta[i+1][b]); beta[n-1] = end.
  // Walk forward so each d_beta row is complete before it is consumed.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t a = 0; a < L; ++a) {
      const double c = d_beta(i, a);
      if (c == 0.0) continue;
      for (std::size_t b = 0; b < L; ++b) {
        const double v = std::exp(crf.transitions(a, b) + student_emissions(i + 1, b) +
                                  t.beta(i + 1, b) - t.beta(i, a));
        g.d_transitions(a, b) += c * v;
        g.d_emissions(i + 1, b) += c * v;
        d_beta(i + 1, b) += c * v;
      }
    }
  }
  for (std::size_t a = 0; a < L; ++a) g.d_end(0, a) += d_beta(n - 1, a);

  // alpha[i][b] = em[i][b] + LSE_a(alpha[i-1][a] + T[a][b]); alpha[0] = start + em[0].
  // Walk backward so each d_alpha row is complete before it is consumed.
  for (std::size_t i = n; i-- > 1;) {
    for (std::size_t b = 0; b < L; ++b) {
      const double c = d_alpha(i, b);
      if (c == 0.0) continue;
      g.d_emissions(i, b) += c;
      const double inner = t.alpha(i, b) - student_emissions(i, b);
      for (std::size_t a = 0; a < L; ++a) {
        const double u = std::exp(t.alpha(i - 1, a) + crf.transitions(a, b) - inner);
        d_alpha(i - 1, a) += c * u;
        g.d_transitions(a, b) += c * u;
      }
    }
  }
  for (std::size_t b = 0; b < L; ++b) {
    g.d_emissions(0, b) += d_alpha(0, b);
    g.d_start(0, b) += d_alpha(0, b);
  }
  return g;
}

}  // namespace ita
