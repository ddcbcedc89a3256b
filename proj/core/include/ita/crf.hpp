#pragma once

#include <cstddef>
#include <vector>

#include "ita/matrix.hpp"

namespace ita {

// Linear-chain potentials: emission(i, y) + transitions[y_prev][y_next], with
// separate start/end scores for the chain boundaries.
struct CrfParams {
  Matrix transitions;  // L x L, indexed [previous][next]
  Matrix start;        // 1 x L
  Matrix end;          // 1 x L

  std::size_t label_count() const { return start.cols(); }
};

// Log-space forward/backward tables with the boundary scores folded in:
//   alpha[i][y] = log sum over prefixes ending in y at i
//   beta[i][y]  = log sum over suffixes starting from y at i (incl. end score)
struct ChainTables {
  Matrix alpha;  // n x L
  Matrix beta;   // n x L
  double log_z = 0.0;
};

struct ViterbiResult {
  std::vector<std::size_t> labels;
  double score = 0.0;
};

struct CvaResult {
  double cross_entropy = 0.0;  // -sum_i sum_l teacher * log(student + eps)
  double kl = 0.0;             // cross_entropy - teacher entropy, >= 0
};

// Gradients of a chain loss with respect to emissions and CRF tables.
struct CrfGradients {
  Matrix d_emissions;    // n x L
  Matrix d_transitions;  // L x L
  Matrix d_start;        // 1 x L
  Matrix d_end;          // 1 x L
};

inline constexpr double kProbEpsilon = 1e-12;

// start[y_0] + sum_i emissions[i][y_i] + sum_{i>=1} T[y_{i-1}][y_i] + end[y_{n-1}].
double score_sequence(const Matrix& emissions, const CrfParams& crf,
                      const std::vector<std::size_t>& labels);

// Forward/backward recursions in log space (log-sum-exp at every step).
ChainTables chain_tables(const Matrix& emissions, const CrfParams& crf);

// log of the summed exponentiated scores over all L^n label sequences.
double log_partition(const Matrix& emissions, const CrfParams& crf);

// log_partition - score_sequence(gold); always >= 0.
double nll(const Matrix& emissions, const CrfParams& crf, const std::vector<std::size_t>& gold);

// Max-product decoding; ties break toward the lowest label id at each step.
ViterbiResult viterbi(const Matrix& emissions, const CrfParams& crf);

// p(y_i = l | input) = exp(alpha[i][l] + beta[i][l] - log_z); rows sum to 1.
Matrix posterior_marginals(const Matrix& emissions, const CrfParams& crf);
Matrix marginals_from_tables(const ChainTables& tables);

// Cross-entropy of the student marginals under the (constant) teacher
// marginals, summed over positions, plus the KL diagnostic.
CvaResult cva_loss(const Matrix& posteriors_teacher, const Matrix& posteriors_student);

// d nll / d emissions[i][l] = p(y_i = l) - [gold_i == l]; transition/start/end
// gradients are expected minus observed feature counts.
CrfGradients nll_backward(const Matrix& emissions, const CrfParams& crf,
                          const std::vector<std::size_t>& gold, const ChainTables& tables);

// Gradients of the CVA cross-entropy with respect to the *student* emissions
// and the CRF tables, obtained by running the forward/backward recursions in
// reverse. The teacher table is a constant: no gradient flows into it.
CrfGradients cva_backward(const Matrix& posteriors_teacher, const Matrix& student_emissions,
                          const CrfParams& crf, const ChainTables& student_tables);

}  // namespace ita
