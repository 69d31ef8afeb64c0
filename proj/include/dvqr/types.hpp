#pragma once

#include <stdexcept>
#include <string>

#include "dvqr/num.hpp"

namespace dvqr {

//! base class for all library errors
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

//! pair-copula family/rotation/parameter outside its documented domain
struct invalid_spec_error : error {
    using error::error;
};

//! Kendall's tau outside the family's attainable range
struct tau_range_error : error {
    using error::error;
};

//! optimizer failure; carries the best parameter seen so far
struct fit_error : error {
    fit_error(const std::string& msg, double best)
        : error(msg)
        , best_so_far(best)
    {
    }
    double best_so_far;
};

struct degenerate_margin_error : error {
    using error::error;
};

struct degenerate_conditioner_error : error {
    using error::error;
};

//! data columns do not match the model or schema
struct schema_error : error {
    using error::error;
};

//! malformed prediction request (alpha outside (0,1), unsorted levels, ...)
struct request_error : error {
    using error::error;
};

//! malformed config or CSV input
struct input_error : error {
    using error::error;
};

//! model-fit criterion: raw conditional log-likelihood or a penalized version
enum class Criterion { cll, aic, bic };

inline const char* criterion_name(Criterion c)
{
    switch (c) {
        case Criterion::cll: return "cll";
        case Criterion::aic: return "aic";
        case Criterion::bic: return "bic";
    }
    return "?";
}

inline Criterion criterion_from_name(const std::string& s)
{
    if (s == "cll")
        return Criterion::cll;
    if (s == "aic")
        return Criterion::aic;
    if (s == "bic")
        return Criterion::bic;
    throw input_error("unknown criterion: " + s);
}

//! A copula-scale observation: the CDF value u, the left limit u{-} just
//! below the observed point, and whether the originating margin is discrete.
//! For continuous margins uminus == u; for discrete margins u - uminus is the
//! probability mass of the observed value. This is the unit every vine
//! computation operates on.
struct PseudoObs {
    double u = 0.5;
    double uminus = 0.5;
    bool discrete = false;

    PseudoObs() = default;
    PseudoObs(double u_, double uminus_, bool discrete_)
        : u(u_)
        , uminus(uminus_)
        , discrete(discrete_)
    {
    }

    //! continuous observation with uminus == u
    static PseudoObs continuous(double u)
    {
        return PseudoObs(u, u, false);
    }

    double mass() const { return u - uminus; }

    bool valid() const
    {
        if (!(0.0 <= uminus && uminus <= u && u <= 1.0))
            return false;
        if (!discrete && uminus != u)
            return false;
        return true;
    }
};

} // namespace dvqr
