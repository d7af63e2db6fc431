#include "evplan/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evplan::lp {

namespace {

enum class VarState { Basic, AtLower, AtUpper };

constexpr std::size_t kDegenerateRunBeforeBland = 50;

class Tableau {
  public:
    Tableau(const LinearProgram& lp, const Options& opt) : opt_(opt) { build(lp); }

    Result run(const LinearProgram& lp) {
        Result result;
        if (trivially_infeasible_) {
            result.status = Status::Infeasible;
            return result;
        }

        // Phase 1: minimise the sum of artificials.
        std::vector<double> phase1(cols_, 0.0);
        for (std::size_t j = first_artificial_; j < cols_; ++j) phase1[j] = 1.0;
        price(phase1);
        Status s = iterate(result.iterations);
        if (s == Status::IterationLimit) {
            result.status = s;
            return result;
        }
        double infeasibility = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (basis_[i] >= first_artificial_) infeasibility += beta_[i];
        }
        if (infeasibility > opt_.feasibility_tol * (1.0 + rhs_scale_) * 10.0) {
            result.status = Status::Infeasible;
            return result;
        }

        // Phase 2: artificials are pinned at zero.
        for (std::size_t j = first_artificial_; j < cols_; ++j) {
            upper_[j] = 0.0;
            if (state_[j] == VarState::AtUpper) state_[j] = VarState::AtLower;
        }
        std::vector<double> phase2(cols_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) phase2[j] = lp.cost[j];
        price(phase2);
        s = iterate(result.iterations);
        if (s != Status::Optimal) {
            result.status = s;
            return result;
        }

        result.status = Status::Optimal;
        result.x.assign(n_, 0.0);
        std::vector<double> value(cols_, 0.0);
        for (std::size_t j = 0; j < cols_; ++j) {
            if (state_[j] == VarState::AtUpper) value[j] = upper_[j];
        }
        for (std::size_t i = 0; i < rows_; ++i) value[basis_[i]] = beta_[i];
        for (std::size_t j = 0; j < n_; ++j) {
            double v = std::clamp(value[j], 0.0, upper_[j]);
            result.x[j] = std::clamp(lp.lower[j] + v, lp.lower[j], lp.upper[j]);
        }
        result.objective = 0.0;
        for (std::size_t j = 0; j < n_; ++j) result.objective += lp.cost[j] * result.x[j];
        return result;
    }

  private:
    void build(const LinearProgram& lp) {
        n_ = lp.num_variables();
        rows_ = lp.rows.size();
        if (lp.lower.size() != n_ || lp.upper.size() != n_) {
            throw std::invalid_argument("LP bound vectors do not match the variable count");
        }

        std::vector<double> rhs(rows_);
        std::vector<Sense> sense(rows_);
        std::vector<double> sign(rows_, 1.0);
        std::size_t n_slack = 0;
        std::size_t n_art = 0;
        for (std::size_t i = 0; i < rows_; ++i) {
            const Row& row = lp.rows[i];
            double b = row.rhs;
            for (const auto& [j, a] : row.terms) {
                if (j >= n_) throw std::invalid_argument("LP row '" + row.name + "' references unknown variable");
                b -= a * lp.lower[j];
            }
            sense[i] = row.sense;
            if (b < 0.0) {
                sign[i] = -1.0;
                b = -b;
                if (sense[i] == Sense::LessEqual) sense[i] = Sense::GreaterEqual;
                else if (sense[i] == Sense::GreaterEqual) sense[i] = Sense::LessEqual;
            }
            rhs[i] = b;
            rhs_scale_ = std::max(rhs_scale_, b);
            if (sense[i] != Sense::Equal) ++n_slack;
            if (sense[i] != Sense::LessEqual) ++n_art;
        }

        cols_ = n_ + n_slack + n_art;
        first_artificial_ = n_ + n_slack;
        upper_.assign(cols_, kInfinity);
        for (std::size_t j = 0; j < n_; ++j) {
            if (!std::isfinite(lp.lower[j])) throw std::invalid_argument("LP lower bounds must be finite");
            const double width = lp.upper[j] - lp.lower[j];
            if (width < -opt_.feasibility_tol) trivially_infeasible_ = true;
            upper_[j] = std::max(0.0, width);
        }

        table_.assign(rows_ * cols_, 0.0);
        beta_.assign(rows_, 0.0);
        basis_.assign(rows_, 0);
        state_.assign(cols_, VarState::AtLower);
        std::size_t slack = n_;
        std::size_t art = first_artificial_;
        for (std::size_t i = 0; i < rows_; ++i) {
            for (const auto& [j, a] : lp.rows[i].terms) at(i, j) += sign[i] * a;
            beta_[i] = rhs[i];
            switch (sense[i]) {
                case Sense::LessEqual:
                    at(i, slack) = 1.0;
                    basis_[i] = slack++;
                    break;
                case Sense::GreaterEqual:
                    at(i, slack++) = -1.0;
                    at(i, art) = 1.0;
                    basis_[i] = art++;
                    break;
                case Sense::Equal:
                    at(i, art) = 1.0;
                    basis_[i] = art++;
                    break;
            }
            state_[basis_[i]] = VarState::Basic;
        }
        reduced_.assign(cols_, 0.0);
    }

    double& at(std::size_t i, std::size_t j) { return table_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return table_[i * cols_ + j]; }

    void price(const std::vector<double>& cost) {
        reduced_ = cost;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            const double* row = &table_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= cb * row[j];
        }
        for (std::size_t i = 0; i < rows_; ++i) reduced_[basis_[i]] = 0.0;
    }

    bool eligible(std::size_t j) const {
        if (state_[j] == VarState::Basic) return false;
        if (upper_[j] <= 0.0) return false;  // fixed
        if (state_[j] == VarState::AtLower) return reduced_[j] < -opt_.optimality_tol;
        return reduced_[j] > opt_.optimality_tol;
    }

    Status iterate(std::size_t& iterations) {
        std::size_t degenerate_run = 0;
        while (true) {
            if (iterations >= opt_.max_iterations) return Status::IterationLimit;
            const bool bland = degenerate_run >= kDegenerateRunBeforeBland;

            std::size_t enter = cols_;
            double best = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (!eligible(j)) continue;
                if (bland) {
                    enter = j;
                    break;
                }
                const double score = std::abs(reduced_[j]);
                if (score > best) {
                    best = score;
                    enter = j;
                }
            }
            if (enter == cols_) return Status::Optimal;
            ++iterations;

            const double dir = state_[enter] == VarState::AtLower ? 1.0 : -1.0;
            double step = upper_[enter];
            std::size_t leave_row = rows_;
            bool leave_to_upper = false;
            double leave_pivot = 0.0;
            for (std::size_t i = 0; i < rows_; ++i) {
                const double a = at(i, enter) * dir;
                double t;
                bool to_upper;
                if (a > opt_.pivot_tol) {
                    t = std::max(0.0, beta_[i]) / a;
                    to_upper = false;
                } else if (a < -opt_.pivot_tol && std::isfinite(upper_[basis_[i]])) {
                    t = std::max(0.0, upper_[basis_[i]] - beta_[i]) / -a;
                    to_upper = true;
                } else {
                    continue;
                }
                bool take = false;
                if (t < step - 1e-12) {
                    take = true;
                } else if (leave_row < rows_ && t <= step + 1e-12) {
                    take = bland ? basis_[i] < basis_[leave_row] : std::abs(a) > std::abs(leave_pivot);
                }
                if (take) {
                    step = std::min(step, t);
                    leave_row = i;
                    leave_to_upper = to_upper;
                    leave_pivot = a;
                }
            }
            if (!std::isfinite(step)) return Status::Unbounded;

            degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;

            for (std::size_t i = 0; i < rows_; ++i) beta_[i] -= step * dir * at(i, enter);

            if (leave_row == rows_) {
                state_[enter] = state_[enter] == VarState::AtLower ? VarState::AtUpper : VarState::AtLower;
                continue;
            }

            const std::size_t leaving = basis_[leave_row];
            state_[leaving] = leave_to_upper ? VarState::AtUpper : VarState::AtLower;
            const double entering_value = dir > 0.0 ? step : upper_[enter] - step;
            pivot(leave_row, enter);
            beta_[leave_row] = entering_value;
            basis_[leave_row] = enter;
            state_[enter] = VarState::Basic;
        }
    }

    void pivot(std::size_t r, std::size_t c) {
        double* prow = &table_[r * cols_];
        const double p = prow[c];
        for (std::size_t j = 0; j < cols_; ++j) prow[j] /= p;
        prow[c] = 1.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i == r) continue;
            double* row = &table_[i * cols_];
            const double f = row[c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
            row[c] = 0.0;
        }
        const double f = reduced_[c];
        if (f != 0.0) {
            for (std::size_t j = 0; j < cols_; ++j) reduced_[j] -= f * prow[j];
            reduced_[c] = 0.0;
        }
    }

    const Options& opt_;
    std::size_t n_ = 0;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::size_t first_artificial_ = 0;
    double rhs_scale_ = 0.0;
    bool trivially_infeasible_ = false;
    std::vector<double> table_;
    std::vector<double> beta_;
    std::vector<std::size_t> basis_;
    std::vector<VarState> state_;
    std::vector<double> upper_;
    std::vector<double> reduced_;
};

}  // namespace

std::size_t LinearProgram::add_variable(double c, double lo, double hi) {
    cost.push_back(c);
    lower.push_back(lo);
    upper.push_back(hi);
    return cost.size() - 1;
}

std::size_t LinearProgram::add_row(Row row) {
    rows.push_back(std::move(row));
    return rows.size() - 1;
}

const char* to_string(Status s) noexcept {
    switch (s) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
        case Status::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

Result solve(const LinearProgram& lp, const Options& options) {
    Tableau tableau(lp, options);
    return tableau.run(lp);
}

std::vector<std::size_t> irreducible_infeasible_rows(const LinearProgram& lp, const Options& options) {
    if (solve(lp, options).status != Status::Infeasible) return {};
    std::vector<bool> keep(lp.rows.size(), true);
    for (std::size_t r = 0; r < lp.rows.size(); ++r) {
        keep[r] = false;
        LinearProgram trial = lp;
        trial.rows.clear();
        for (std::size_t i = 0; i < lp.rows.size(); ++i) {
            if (keep[i]) trial.rows.push_back(lp.rows[i]);
        }
        if (solve(trial, options).status != Status::Infeasible) keep[r] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (keep[i]) out.push_back(i);
    }
    return out;
}

}  // namespace evplan::lp
