#include "idcol/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace idcol::shapes {

namespace {

// u^k by repeated squaring; exponents here are small (k <= ~32).
inline double pow_int(double u, int k) {
    double result = 1.0;
    double base = u;
    while (k > 0) {
        if (k & 1) result *= base;
        base *= base;
        k >>= 1;
    }
    return result;
}

[[noreturn]] void domain_error(const char* kind, const Vector3d& y) {
    std::ostringstream os;
    os << "shape evaluation out of range for " << kind << " at y = ["
       << y.x() << ", " << y.y() << ", " << y.z() << "]";
    throw DomainError(os.str());
}

// Bitwise symmetrization: (i,j) and (j,i) get the identical rounded sum.
inline void symmetrize(Matrix3d& m) {
    m = 0.5 * (m + Matrix3d(m.transpose()));
}

inline bool finite(const ShapeEval& e) {
    return std::isfinite(e.value) && e.gradient.allFinite() &&
           e.hessian.allFinite();
}

// Fibonacci sphere: n quasi-uniform unit directions, deterministic.
std::vector<Vector3d> fibonacci_directions(int n) {
    const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
    std::vector<Vector3d> dirs;
    dirs.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        dirs.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
    }
    return dirs;
}

} // namespace

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void validate(SmoothPolytopeSpec& spec) {
    if (spec.normals.size() != spec.offsets.size())
        throw Error("polytope: normals and offsets must have equal length");
    if (spec.normals.size() < 4)
        throw Error("polytope: at least 4 half-spaces required");
    if (!(spec.char_length > 0.0))
        throw Error("polytope: char_length must be > 0");
    if (!(spec.smax.beta > 0.0)) throw Error("polytope: beta must be > 0");
    for (std::size_t i = 0; i < spec.normals.size(); ++i) {
        const double norm = spec.normals[i].norm();
        if (!(norm > 1e-12)) throw Error("polytope: zero-length normal");
        spec.normals[i] /= norm;
        spec.offsets[i] /= norm;
        if (!(spec.offsets[i] > 0.0))
            throw Error("polytope: origin must be strictly interior "
                        "(all offsets > 0 after normalization)");
    }
}

void validate(const TruncatedConeSpec& spec) {
    if (!(spec.r_bottom > 0.0 && spec.r_top > 0.0))
        throw Error("truncated_cone: radii must be > 0 "
                    "(regularize true cones with r_top = 1e-3 r_bottom)");
    if (!(spec.ext_below > 0.0 && spec.ext_above > 0.0))
        throw Error("truncated_cone: axial extents must be > 0");
    if (!(spec.smax.beta > 0.0)) throw Error("truncated_cone: beta must be > 0");
}

void validate(const SuperellipsoidSpec& spec) {
    if (!(spec.semi_axes.minCoeff() > 0.0))
        throw Error("superellipsoid: semi_axes must be > 0");
    if (spec.exponent < 1) throw Error("superellipsoid: exponent must be >= 1");
    if (spec.reg_eps < 0.0) throw Error("superellipsoid: reg_eps must be >= 0");
    if (spec.exponent > 1 && !(spec.reg_eps > 0.0))
        throw Error("superellipsoid: reg_eps > 0 required when exponent > 1");
}

void validate(const SuperellipticCylinderSpec& spec) {
    if (!(spec.radius > 0.0 && spec.half_length > 0.0))
        throw Error("superelliptic_cylinder: radius and half_length must be > 0");
    if (spec.exponent < 1)
        throw Error("superelliptic_cylinder: exponent must be >= 1");
    if (spec.reg_eps < 0.0)
        throw Error("superelliptic_cylinder: reg_eps must be >= 0");
    if (spec.exponent > 1 && !(spec.reg_eps > 0.0))
        throw Error("superelliptic_cylinder: reg_eps > 0 required when exponent > 1");
}

void validate(ShapeSpec& spec) {
    std::visit([](auto& s) { validate(s); }, spec);
}

// ---------------------------------------------------------------------------
// Smooth maximum
// ---------------------------------------------------------------------------

ShapeEval smooth_max(std::span<const ShapeEval> components, SmoothMaxParams params) {
    if (components.empty()) throw Error("smooth_max: empty component list");
    const double beta = params.beta;

    double m = components[0].value;
    for (const auto& c : components) m = std::max(m, c.value);

    double sum = 0.0;
    Vector3d grad = Vector3d::Zero();
    Matrix3d weighted_hess = Matrix3d::Zero();
    Matrix3d weighted_outer = Matrix3d::Zero();
    for (const auto& c : components) {
        const double u = std::exp(beta * (c.value - m));
        sum += u;
        grad.noalias() += u * c.gradient;
        weighted_hess.noalias() += u * c.hessian;
        weighted_outer.noalias() += u * (c.gradient * c.gradient.transpose());
    }

    ShapeEval out;
    out.value = m + std::log(sum) / beta;
    grad /= sum;
    out.gradient = grad;
    out.hessian = weighted_hess / sum +
                  beta * (weighted_outer / sum - grad * grad.transpose());
    symmetrize(out.hessian);
    return out;
}

// ---------------------------------------------------------------------------
// Smooth polytope
// ---------------------------------------------------------------------------

ShapeEval eval_shape(const SmoothPolytopeSpec& spec, const Vector3d& y) {
    const double L = spec.char_length;
    const double beta = spec.smax.beta;
    const int m = static_cast<int>(spec.normals.size());

    // c_i = (a_i^T y - b_i)/L; smax over c_i with the max shift done on the
    // unscaled z_i (equivalent, one division fewer per face).
    double zmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
        zmax = std::max(zmax, spec.normals[i].dot(y) - spec.offsets[i]);

    const double beta_over_L = beta / L;
    double sum = 0.0;
    Vector3d abar = Vector3d::Zero();
    Matrix3d aat = Matrix3d::Zero();
    for (int i = 0; i < m; ++i) {
        const Vector3d& a = spec.normals[i];
        const double z = a.dot(y) - spec.offsets[i];
        const double u = std::exp(beta_over_L * (z - zmax));
        sum += u;
        abar.noalias() += u * a;
        aat.noalias() += u * (a * a.transpose());
    }
    abar /= sum;

    ShapeEval out;
    out.value = zmax / L + std::log(sum) / beta;
    out.gradient = abar / L;
    out.hessian = (beta / (L * L)) * (aat / sum - abar * abar.transpose());
    symmetrize(out.hessian);
    if (!finite(out)) domain_error("polytope", y);
    return out;
}

// ---------------------------------------------------------------------------
// Smooth truncated cone
// ---------------------------------------------------------------------------

ShapeEval eval_shape(const TruncatedConeSpec& spec, const Vector3d& y) {
    const double a = spec.ext_below, b = spec.ext_above;
    const double h = a + b;
    const double kappa = (spec.r_top - spec.r_bottom) / h;
    const double r2 = y.y() * y.y() + y.z() * y.z();

    // Radius tapers linearly along the axis; clamp |R| away from zero so
    // evaluations far beyond the apex stay finite (the caps dominate there).
    double R = spec.r_bottom + kappa * (y.x() + a);
    const double R_floor = 1e-9 * (spec.r_bottom + spec.r_top);
    if (std::abs(R) < R_floor) R = (R >= 0.0) ? R_floor : -R_floor;
    const double R2 = R * R;
    const double R3 = R2 * R;
    const double R4 = R2 * R2;

    ShapeEval side;
    side.value = r2 / R2 - 1.0;
    side.gradient = Vector3d(-2.0 * kappa * r2 / R3, 2.0 * y.y() / R2,
                             2.0 * y.z() / R2);
    side.hessian(0, 0) = 6.0 * kappa * kappa * r2 / R4;
    side.hessian(1, 1) = 2.0 / R2;
    side.hessian(2, 2) = 2.0 / R2;
    side.hessian(0, 1) = side.hessian(1, 0) = -4.0 * kappa * y.y() / R3;
    side.hessian(0, 2) = side.hessian(2, 0) = -4.0 * kappa * y.z() / R3;

    ShapeEval bottom;
    bottom.value = -y.x() / a - 1.0;
    bottom.gradient = Vector3d(-1.0 / a, 0.0, 0.0);

    ShapeEval top;
    top.value = y.x() / b - 1.0;
    top.gradient = Vector3d(1.0 / b, 0.0, 0.0);

    const ShapeEval parts[3] = {side, bottom, top};
    ShapeEval out = smooth_max(parts, spec.smax);
    if (!finite(out)) domain_error("truncated_cone", y);
    return out;
}

// ---------------------------------------------------------------------------
// Superellipsoid
// ---------------------------------------------------------------------------

ShapeEval eval_shape(const SuperellipsoidSpec& spec, const Vector3d& y) {
    const int n = spec.exponent;
    const double eps = spec.reg_eps;

    double S = 0.0;
    Vector3d gS;
    Vector3d hS; // diagonal of hess S
    for (int i = 0; i < 3; ++i) {
        const double inv_s = 1.0 / spec.semi_axes[i];
        const double yb = y[i] * inv_s;
        const double t = yb * yb + eps;
        const double t_nm2 = (n >= 2) ? pow_int(t, n - 2) : 0.0;
        const double t_nm1 = (n >= 2) ? t_nm2 * t : 1.0;
        S += t_nm1 * t;
        gS[i] = 2.0 * n * inv_s * yb * t_nm1;
        hS[i] = 2.0 * n * inv_s * inv_s *
                (t_nm1 + 2.0 * (n - 1) * yb * yb * t_nm2);
    }

    if (S <= 0.0) domain_error("superellipsoid", y); // only at y=0 with eps=0
    const double inv_e = 1.0 / (2.0 * n);
    const double psi = std::pow(S, inv_e);
    const double psi1 = inv_e * psi / S;
    const double psi2 = inv_e * (inv_e - 1.0) * psi / (S * S);

    ShapeEval out;
    out.value = psi - 1.0;
    out.gradient = psi1 * gS;
    out.hessian.setZero();
    out.hessian.diagonal() = psi1 * hS;
    out.hessian.noalias() += psi2 * (gS * gS.transpose());
    symmetrize(out.hessian);
    if (!finite(out)) domain_error("superellipsoid", y);
    return out;
}

// ---------------------------------------------------------------------------
// Superelliptic cylinder
// ---------------------------------------------------------------------------

ShapeEval eval_shape(const SuperellipticCylinderSpec& spec, const Vector3d& y) {
    const int n = spec.exponent;
    const double eps = spec.reg_eps;
    const double inv_h = 1.0 / spec.half_length;
    const double inv_R2 = 1.0 / (spec.radius * spec.radius);

    const double yb = y.x() * inv_h;
    const double ta = yb * yb + eps;
    const double ta_nm2 = (n >= 2) ? pow_int(ta, n - 2) : 0.0;
    const double ta_nm1 = (n >= 2) ? ta_nm2 * ta : 1.0;

    const double rb2 = (y.y() * y.y() + y.z() * y.z()) * inv_R2;
    const double tr = rb2 + eps;
    const double tr_nm2 = (n >= 2) ? pow_int(tr, n - 2) : 0.0;
    const double tr_nm1 = (n >= 2) ? tr_nm2 * tr : 1.0;

    const double S = ta_nm1 * ta + tr_nm1 * tr;
    if (S <= 0.0) domain_error("superelliptic_cylinder", y);

    Vector3d gS(2.0 * n * inv_h * yb * ta_nm1,
                2.0 * n * inv_R2 * y.y() * tr_nm1,
                2.0 * n * inv_R2 * y.z() * tr_nm1);

    Matrix3d hSm = Matrix3d::Zero();
    hSm(0, 0) = 2.0 * n * inv_h * inv_h *
                (ta_nm1 + 2.0 * (n - 1) * yb * yb * ta_nm2);
    hSm(1, 1) = 2.0 * n * inv_R2 *
                (tr_nm1 + 2.0 * (n - 1) * y.y() * y.y() * inv_R2 * tr_nm2);
    hSm(2, 2) = 2.0 * n * inv_R2 *
                (tr_nm1 + 2.0 * (n - 1) * y.z() * y.z() * inv_R2 * tr_nm2);
    hSm(1, 2) = hSm(2, 1) =
        4.0 * n * (n - 1) * inv_R2 * inv_R2 * y.y() * y.z() * tr_nm2;

    const double inv_e = 1.0 / (2.0 * n);
    const double psi = std::pow(S, inv_e);
    const double psi1 = inv_e * psi / S;
    const double psi2 = inv_e * (inv_e - 1.0) * psi / (S * S);

    ShapeEval out;
    out.value = psi - 1.0;
    out.gradient = psi1 * gS;
    out.hessian = psi1 * hSm;
    out.hessian.noalias() += psi2 * (gS * gS.transpose());
    symmetrize(out.hessian);
    if (!finite(out)) domain_error("superelliptic_cylinder", y);
    return out;
}

ShapeEval eval_shape(const ShapeSpec& spec, const Vector3d& y) {
    return std::visit([&](const auto& s) { return eval_shape(s, y); }, spec);
}

// ---------------------------------------------------------------------------
// Value-only evaluation (no derivative singularities, cheaper)
// ---------------------------------------------------------------------------

namespace {

double value_only(const SmoothPolytopeSpec& spec, const Vector3d& y) {
    const int m = static_cast<int>(spec.normals.size());
    double zmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i)
        zmax = std::max(zmax, spec.normals[i].dot(y) - spec.offsets[i]);
    double sum = 0.0;
    const double bL = spec.smax.beta / spec.char_length;
    for (int i = 0; i < m; ++i)
        sum += std::exp(bL * (spec.normals[i].dot(y) - spec.offsets[i] - zmax));
    return zmax / spec.char_length + std::log(sum) / spec.smax.beta;
}

double value_only(const TruncatedConeSpec& spec, const Vector3d& y) {
    const double a = spec.ext_below, b = spec.ext_above;
    const double kappa = (spec.r_top - spec.r_bottom) / (a + b);
    double R = spec.r_bottom + kappa * (y.x() + a);
    const double R_floor = 1e-9 * (spec.r_bottom + spec.r_top);
    if (std::abs(R) < R_floor) R = (R >= 0.0) ? R_floor : -R_floor;
    const double vals[3] = {(y.y() * y.y() + y.z() * y.z()) / (R * R) - 1.0,
                            -y.x() / a - 1.0, y.x() / b - 1.0};
    const double m = std::max({vals[0], vals[1], vals[2]});
    double sum = 0.0;
    for (double v : vals) sum += std::exp(spec.smax.beta * (v - m));
    return m + std::log(sum) / spec.smax.beta;
}

double value_only(const SuperellipsoidSpec& spec, const Vector3d& y) {
    const int n = spec.exponent;
    double S = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double yb = y[i] / spec.semi_axes[i];
        S += pow_int(yb * yb + spec.reg_eps, n);
    }
    return std::pow(S, 1.0 / (2.0 * n)) - 1.0;
}

double value_only(const SuperellipticCylinderSpec& spec, const Vector3d& y) {
    const int n = spec.exponent;
    const double yb = y.x() / spec.half_length;
    const double rb2 =
        (y.y() * y.y() + y.z() * y.z()) / (spec.radius * spec.radius);
    const double S =
        pow_int(yb * yb + spec.reg_eps, n) + pow_int(rb2 + spec.reg_eps, n);
    return std::pow(S, 1.0 / (2.0 * n)) - 1.0;
}

} // namespace

double eval_value(const ShapeSpec& spec, const Vector3d& y) {
    return std::visit([&](const auto& s) { return value_only(s, y); }, spec);
}

// ---------------------------------------------------------------------------
// Bounding radii
// ---------------------------------------------------------------------------

double ray_root(const ShapeSpec& spec, const Vector3d& dir) {
    // phi is convex along rays from the interior origin: single sign change.
    double t_lo = 0.0, t_hi = 1.0;
    int budget = 600;
    while (eval_value(spec, t_hi * dir) < 0.0) {
        t_lo = t_hi;
        t_hi *= 2.0;
        if (--budget == 0 || !std::isfinite(t_hi))
            throw BracketFailure("ray_root: no surface crossing found");
    }
    for (int i = 0; i < 200 && (t_hi - t_lo) > 1e-15 * t_hi; ++i) {
        const double mid = 0.5 * (t_lo + t_hi);
        (eval_value(spec, mid * dir) < 0.0 ? t_lo : t_hi) = mid;
    }
    return 0.5 * (t_lo + t_hi);
}

BoundingRadii bounding_radii(const ShapeSpec& spec, int n_dirs, double safety) {
    if (n_dirs < 1) throw Error("bounding_radii: n_dirs must be >= 1");
    if (!(safety > 0.0 && safety <= 1.0))
        throw Error("bounding_radii: safety must be in (0, 1]");
    if (!(eval_value(spec, Vector3d::Zero()) < 0.0))
        throw NotContainingOrigin(
            "bounding_radii: phi(0) >= 0, origin not strictly interior");

    double t_min = std::numeric_limits<double>::infinity();
    double t_max = 0.0;
    for (const Vector3d& d : fibonacci_directions(n_dirs)) {
        const double t = ray_root(spec, d);
        t_min = std::min(t_min, t);
        t_max = std::max(t_max, t);
    }
    return BoundingRadii{safety * t_min, t_max / safety};
}

// ---------------------------------------------------------------------------
// Derived specs
// ---------------------------------------------------------------------------

ShapeSpec scaled(const ShapeSpec& spec, double c) {
    if (!(c > 0.0)) throw Error("scaled: factor must be > 0");
    ShapeSpec out = spec;
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SmoothPolytopeSpec>) {
                for (double& b : s.offsets) b *= c;
                s.char_length *= c;
            } else if constexpr (std::is_same_v<T, TruncatedConeSpec>) {
                s.r_bottom *= c;
                s.r_top *= c;
                s.ext_below *= c;
                s.ext_above *= c;
            } else if constexpr (std::is_same_v<T, SuperellipsoidSpec>) {
                s.semi_axes *= c;
            } else {
                s.radius *= c;
                s.half_length *= c;
            }
        },
        out);
    return out;
}

ShapeSpec smoothed(const ShapeSpec& spec, int level) {
    ShapeSpec out = spec;
    if (level <= 0) return out;
    const double beta_factor = std::pow(0.5, level);
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SmoothPolytopeSpec> ||
                          std::is_same_v<T, TruncatedConeSpec>) {
                s.smax.beta = std::max(s.smax.beta * beta_factor, 5.0);
            } else {
                s.exponent = std::max(s.exponent >> std::min(level, 30), 1);
            }
        },
        out);
    return out;
}

bool continuation_suggested(const ShapeSpec& spec) {
    return std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SmoothPolytopeSpec> ||
                          std::is_same_v<T, TruncatedConeSpec>)
                return s.smax.beta >= 30.0;
            else
                return s.exponent >= 4;
        },
        spec);
}

double default_char_length(const SmoothPolytopeSpec& spec) {
    // Circumradius of the exact polytope, sampled along Fibonacci rays:
    // along d the exact boundary sits at min_i b_i / (a_i^T d) over a_i^T d > 0.
    double r = 0.0;
    for (const Vector3d& d : fibonacci_directions(256)) {
        double t = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < spec.normals.size(); ++i) {
            const double proj = spec.normals[i].dot(d);
            if (proj > 1e-12) t = std::min(t, spec.offsets[i] / proj);
        }
        if (!std::isfinite(t))
            throw Error("default_char_length: polytope is unbounded");
        r = std::max(r, t);
    }
    return r;
}

SmoothPolytopeSpec make_box(const Vector3d& half_extents, double beta,
                            double char_length) {
    SmoothPolytopeSpec spec;
    for (int i = 0; i < 3; ++i) {
        Vector3d n = Vector3d::Zero();
        n[i] = 1.0;
        spec.normals.push_back(n);
        spec.offsets.push_back(half_extents[i]);
        spec.normals.push_back(-n);
        spec.offsets.push_back(half_extents[i]);
    }
    spec.char_length = char_length > 0.0 ? char_length : half_extents.norm();
    spec.smax.beta = beta;
    validate(spec);
    return spec;
}

} // namespace idcol::shapes
