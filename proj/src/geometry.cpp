#include "gridfuse/geometry.hpp"

#include "gridfuse/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace gridfuse {

namespace {

bool finite(double v) { return std::isfinite(v); }

bool all_finite(const Vec3& v) { return finite(v.x()) && finite(v.y()) && finite(v.z()); }

}  // namespace

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera sensor size must be positive");
  if (!finite(f) || f <= 0.0) throw std::invalid_argument("focal length must be finite and positive");
  bool ok = finite(cx) && finite(cy) && finite(b1) && finite(b2);
  for (double c : k) ok = ok && finite(c);
  for (double c : p) ok = ok && finite(c);
  if (!ok) throw std::invalid_argument("camera intrinsics contain non-finite coefficients");
}

bool CameraIntrinsics::has_distortion() const {
  for (double c : k)
    if (c != 0.0) return true;
  for (double c : p)
    if (c != 0.0) return true;
  return false;
}

CameraPose::CameraPose() : position_(Vec3::Zero()), rotation_(Mat3::Identity()) {}

CameraPose::CameraPose(const Vec3& position, double omega, double phi, double kappa)
    : position_(position), omega_(omega), phi_(phi), kappa_(kappa) {
  if (!all_finite(position)) throw std::invalid_argument("camera position must be finite");
  rotation_ = rotation_from_euler(omega, phi, kappa);
}

Mat3 rotation_from_euler(double omega, double phi, double kappa) {
  if (!finite(omega) || !finite(phi) || !finite(kappa))
    throw std::invalid_argument("rotation angles must be finite");
  const double co = std::cos(omega), so = std::sin(omega);
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double ck = std::cos(kappa), sk = std::sin(kappa);
  Mat3 rx, ry, rz;
  rx << 1, 0, 0,
        0, co, so,
        0, -so, co;
  ry << cp, 0, -sp,
        0, 1, 0,
        sp, 0, cp;
  rz << ck, sk, 0,
        -sk, ck, 0,
        0, 0, 1;
  return rz * ry * rx;
}

Vec3 world_to_camera(const CameraPose& pose, const Vec3& world) {
  if (!all_finite(world)) throw std::invalid_argument("world point must be finite");
  return pose.rotation() * (world - pose.position());
}

Vec2 distort(const CameraIntrinsics& intr, const Vec2& xy) {
  const double x = xy.x(), y = xy.y();
  const double r = x * x + y * y;
  const auto& k = intr.k;
  const auto& p = intr.p;
  // Horner form of 1 + k1 r + ... + k5 r^5
  const double dr = 1.0 + r * (k[0] + r * (k[1] + r * (k[2] + r * (k[3] + r * k[4]))));
  const double t = 1.0 + p[2] * r + p[3] * r * r;
  const double dtx = p[0] * (r + 2.0 * x * x) + 2.0 * p[1] * x * y * t;
  const double dty = p[1] * (r + 2.0 * y * y) + 2.0 * p[0] * x * y * t;
  return {x * dr + dtx, y * dr + dty};
}

Eigen::Matrix2d distort_jacobian(const CameraIntrinsics& intr, const Vec2& xy) {
  const double x = xy.x(), y = xy.y();
  const double r = x * x + y * y;
  const auto& k = intr.k;
  const auto& p = intr.p;
  const double dr = 1.0 + r * (k[0] + r * (k[1] + r * (k[2] + r * (k[3] + r * k[4]))));
  const double dr_dr = k[0] + r * (2.0 * k[1] + r * (3.0 * k[2] + r * (4.0 * k[3] + r * 5.0 * k[4])));
  const double t = 1.0 + p[2] * r + p[3] * r * r;
  const double dt_dr = p[2] + 2.0 * p[3] * r;

  const double dtx_dx = 6.0 * p[0] * x + 2.0 * p[1] * y * t + 4.0 * p[1] * x * x * y * dt_dr;
  const double dtx_dy = 2.0 * p[0] * y + 2.0 * p[1] * x * t + 4.0 * p[1] * x * y * y * dt_dr;
  const double dty_dx = 2.0 * p[1] * x + 2.0 * p[0] * y * t + 4.0 * p[0] * x * x * y * dt_dr;
  const double dty_dy = 6.0 * p[1] * y + 2.0 * p[0] * x * t + 4.0 * p[0] * x * y * y * dt_dr;

  Eigen::Matrix2d j;
  j(0, 0) = dr + 2.0 * x * x * dr_dr + dtx_dx;
  j(0, 1) = 2.0 * x * y * dr_dr + dtx_dy;
  j(1, 0) = 2.0 * x * y * dr_dr + dty_dx;
  j(1, 1) = dr + 2.0 * y * y * dr_dr + dty_dy;
  return j;
}

namespace {

bool converged(const Vec2& residual, const Vec2& target, double tolerance) {
  if (!finite(residual.x()) || !finite(residual.y())) return false;
  // Newton can stall a few ulps above a very tight tolerance; accept a
  // residual at the level of the input's rounding.
  const double scale = std::max(1.0, target.lpNorm<Eigen::Infinity>());
  return residual.lpNorm<Eigen::Infinity>() <= std::max(tolerance, 8.0 * 2.3e-16 * scale);
}

// Damped Newton from `xy`: the step is halved until the residual shrinks.
bool newton(const CameraIntrinsics& intr, const Vec2& target, Vec2& xy, double tolerance, int max_iterations,
            int& used) {
  Vec2 residual = distort(intr, xy) - target;
  for (; used < max_iterations; ++used) {
    if (residual.lpNorm<Eigen::Infinity>() <= tolerance) return true;
    const Eigen::Matrix2d j = distort_jacobian(intr, xy);
    const double det = j.determinant();
    if (!finite(det) || std::abs(det) < 1e-300) break;
    const Vec2 step = j.inverse() * residual;
    const double norm = residual.norm();
    double t = 1.0;
    Vec2 next = xy - step;
    Vec2 next_res = distort(intr, next) - target;
    for (int h = 0; h < 40 && !(next_res.norm() < norm); ++h) {
      t *= 0.5;
      next = xy - t * step;
      next_res = distort(intr, next) - target;
    }
    if (!finite(next.x()) || !finite(next.y()) || !(next_res.norm() <= norm)) break;
    xy = next;
    residual = next_res;
  }
  return converged(residual, target, tolerance);
}

}  // namespace

Vec2 undistort(const CameraIntrinsics& intr, const Vec2& distorted, double tolerance, int max_iterations) {
  if (!finite(distorted.x()) || !finite(distorted.y()))
    throw std::invalid_argument("distorted coordinates must be finite");
  if (!intr.has_distortion()) return distorted;

  int used = 0;
  Vec2 xy = distorted;
  if (newton(intr, distorted, xy, tolerance, max_iterations, used)) return xy;

  // Starting at the target can land past a fold of the map. Follow the branch
  // through the origin instead, walking the target out along its ray.
  const int steps = 16;
  xy = Vec2::Zero();
  for (int s = 1; s <= steps; ++s) {
    const double frac = double(s) / steps;
    const Vec2 target = frac * distorted;
    int sub = 0;
    const bool last = s == steps;
    if (!newton(intr, target, xy, last ? tolerance : 1e-12, max_iterations, sub) && (last || sub >= max_iterations))
      break;
    if (last) return xy;
  }
  throw ConvergenceError("undistort did not converge within " + std::to_string(max_iterations) + " iterations");
}

Vec2 to_pixel(const CameraIntrinsics& intr, const Vec2& d) {
  const double fx = 0.5 * intr.width + intr.cx + d.x() * intr.f + d.x() * intr.b1 + d.y() * intr.b2;
  const double fy = 0.5 * intr.height + intr.cy + d.y() * intr.f;
  return {fx, fy};
}

ProjectionResult project(const CameraIntrinsics& intr, const CameraPose& pose, const Vec3& world) {
  const Vec3 c = world_to_camera(pose, world);
  ProjectionResult out;
  out.depth = -c.z();
  if (c.z() >= 0.0) {
    out.status = ProjectionStatus::BehindCamera;
    return out;
  }
  const Vec2 xy(-c.x() / c.z(), -c.y() / c.z());
  out.pixel = to_pixel(intr, distort(intr, xy));
  const bool inside = out.pixel.x() >= 0.0 && out.pixel.x() < intr.width && out.pixel.y() >= 0.0 &&
                      out.pixel.y() < intr.height;
  out.status = inside ? ProjectionStatus::InFrame : ProjectionStatus::OutOfFrame;
  return out;
}

}  // namespace gridfuse
