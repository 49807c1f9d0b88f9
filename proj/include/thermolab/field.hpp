#ifndef THERMOLAB_FIELD_HPP
#define THERMOLAB_FIELD_HPP

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <utility>

#include "thermolab/expression.hpp"

namespace thermolab {

/// A state (x, y, theta) of the unit sphere bundle in base coordinates.
struct SMPoint {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  double coord(Var v) const { return v == Var::x ? x : v == Var::y ? y : theta; }
  SMPoint shifted(Var v, double delta) const {
    SMPoint p = *this;
    (v == Var::x ? p.x : v == Var::y ? p.y : p.theta) += delta;
    return p;
  }
};

inline double normalize_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double t = std::fmod(theta, two_pi);
  if (t < 0.0) t += two_pi;
  if (t >= two_pi) t -= two_pi;
  return t;
}

inline SMPoint normalized(SMPoint p) {
  p.theta = normalize_angle(p.theta);
  return p;
}

/// Value together with the three coordinate partials.
struct Jet {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  double d(Var v) const { return v == Var::x ? dx : v == Var::y ? dy : dtheta; }
};

struct FdOptions {
  double step = 1e-4;
  /// Switch the base-direction stencil to one-sided when it would leave the
  /// closed unit disk.
  bool disk_one_sided = false;
};

namespace detail {

/// Fourth-order central difference, or the fourth-order one-sided formula
/// pointing into the disk when the central stencil would exit it.
template <typename Fn>
double fd_partial(const Fn& f, const SMPoint& p, Var v, const FdOptions& opts) {
  const double h = opts.step;
  auto outside = [](const SMPoint& q) { return q.x * q.x + q.y * q.y > 1.0; };
  if (opts.disk_one_sided && v != Var::theta && (outside(p.shifted(v, 2 * h)) || outside(p.shifted(v, -2 * h)))) {
    const double dir = outside(p.shifted(v, 2 * h)) ? -1.0 : 1.0;
    const double s = dir * h;
    const double f0 = f(p), f1 = f(p.shifted(v, s)), f2 = f(p.shifted(v, 2 * s)), f3 = f(p.shifted(v, 3 * s)),
                 f4 = f(p.shifted(v, 4 * s));
    return (-25.0 * f0 + 48.0 * f1 - 36.0 * f2 + 16.0 * f3 - 3.0 * f4) / (12.0 * s);
  }
  return (-f(p.shifted(v, 2 * h)) + 8.0 * f(p.shifted(v, h)) - 8.0 * f(p.shifted(v, -h)) + f(p.shifted(v, -2 * h))) /
         (12.0 * h);
}

}  // namespace detail

/// Scalar function on the bundle. Analytic fields carry an Expression and
/// differentiate symbolically; finite-difference fields wrap a callable and
/// differentiate with the stencil in FdOptions.
class Field {
 public:
  enum class Mode { analytic, finite_difference };
  using Function = std::function<double(const SMPoint&)>;

  Field() : Field(0.0) {}
  Field(double c) : Field(Expression(c)) {}  // NOLINT(google-explicit-constructor)
  Field(Expression e) : impl_(std::make_shared<Impl>()) {  // NOLINT(google-explicit-constructor)
    impl_->expression = std::move(e);
    impl_->code = CompiledExpression(*impl_->expression);
  }
  static Field parse(std::string_view text) { return Field(Expression::parse(text)); }

  static Field from_function(Function fn, FdOptions opts = {}) {
    Field f;
    f.impl_ = std::make_shared<Impl>();
    f.impl_->function = std::move(fn);
    f.impl_->fd = opts;
    return f;
  }

  /// Same values, derivatives taken by finite differences.
  Field as_finite_difference(FdOptions opts = {}) const {
    Field self = *this;
    return from_function([self](const SMPoint& p) { return self(p); }, opts);
  }

  Mode mode() const { return impl_->expression ? Mode::analytic : Mode::finite_difference; }
  bool analytic() const { return mode() == Mode::analytic; }
  const Expression& expression() const { return *impl_->expression; }
  const FdOptions& fd_options() const { return impl_->fd; }
  bool is_constant(double c) const { return analytic() && impl_->expression->is_constant(c); }

  double operator()(const SMPoint& p) const {
    if (impl_->expression) return impl_->code(p.x, p.y, p.theta);
    return impl_->function(p);
  }

  Field partial(Var v) const {
    auto& slot = impl_->partials[static_cast<std::size_t>(v)];
    std::call_once(slot.once, [&] {
      if (impl_->expression) {
        slot.field = std::make_shared<Field>(impl_->expression->derivative(v));
      } else {
        Field self = *this;
        const FdOptions opts = impl_->fd;
        slot.field = std::make_shared<Field>(from_function(
            [self, v, opts](const SMPoint& p) { return detail::fd_partial(self, p, v, opts); }, opts));
      }
    });
    return *slot.field;
  }

  double partial_at(Var v, const SMPoint& p) const {
    if (impl_->expression) return partial(v)(p);
    return detail::fd_partial(*this, p, v, impl_->fd);
  }

  Jet jet(const SMPoint& p) const {
    return Jet{(*this)(p), partial_at(Var::x, p), partial_at(Var::y, p), partial_at(Var::theta, p)};
  }

  friend Field operator-(const Field& a) { return a.map([](double u) { return -u; }, [](const Expression& e) { return -e; }); }
  friend Field operator+(const Field& a, const Field& b) {
    return combine(a, b, [](double u, double v) { return u + v; }, [](const Expression& u, const Expression& v) { return u + v; });
  }
  friend Field operator-(const Field& a, const Field& b) {
    return combine(a, b, [](double u, double v) { return u - v; }, [](const Expression& u, const Expression& v) { return u - v; });
  }
  friend Field operator*(const Field& a, const Field& b) {
    return combine(a, b, [](double u, double v) { return u * v; }, [](const Expression& u, const Expression& v) { return u * v; });
  }
  friend Field operator/(const Field& a, const Field& b) {
    return combine(a, b, [](double u, double v) { return u / v; }, [](const Expression& u, const Expression& v) { return u / v; });
  }
  Field squared() const { return *this * *this; }

 private:
  struct PartialSlot {
    std::once_flag once;
    std::shared_ptr<Field> field;
  };
  struct Impl {
    std::optional<Expression> expression;
    CompiledExpression code;
    Function function;
    FdOptions fd;
    std::array<PartialSlot, 3> partials;
  };

  template <typename NumOp, typename ExprOp>
  Field map(NumOp num, ExprOp sym) const {
    if (analytic()) return Field(sym(expression()));
    Field self = *this;
    return from_function([self, num](const SMPoint& p) { return num(self(p)); }, impl_->fd);
  }

  template <typename NumOp, typename ExprOp>
  static Field combine(const Field& a, const Field& b, NumOp num, ExprOp sym) {
    if (a.analytic() && b.analytic()) return Field(sym(a.expression(), b.expression()));
    const FdOptions opts = a.analytic() ? b.impl_->fd : a.impl_->fd;
    return from_function([a, b, num](const SMPoint& p) { return num(a(p), b(p)); }, opts);
  }

  std::shared_ptr<Impl> impl_;
};

}  // namespace thermolab

#endif
