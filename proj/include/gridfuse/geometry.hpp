#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <string>

namespace gridfuse {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Frame-style intrinsics: principal point and skew are offsets from the
// image centre, radial/tangential coefficients follow the polynomial
// model in distort().
struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double f = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  std::array<double, 5> k{};  // k1..k5
  std::array<double, 4> p{};  // p1..p4

  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  bool has_distortion() const;
};

// Camera centre S and omega/phi/kappa orientation. The rotation matrix is
// computed once at construction.
class CameraPose {
 public:
  CameraPose();
  CameraPose(const Vec3& position, double omega, double phi, double kappa);

  const Vec3& position() const { return position_; }
  double omega() const { return omega_; }
  double phi() const { return phi_; }
  double kappa() const { return kappa_; }
  const Mat3& rotation() const { return rotation_; }

 private:
  Vec3 position_;
  double omega_ = 0.0;
  double phi_ = 0.0;
  double kappa_ = 0.0;
  Mat3 rotation_;
};

struct Camera {
  std::string id;
  CameraIntrinsics intrinsics;
  CameraPose pose;
};

enum class ProjectionStatus { InFrame, OutOfFrame, BehindCamera };

struct ProjectionResult {
  Vec2 pixel{0.0, 0.0};  // continuous (f_x, f_y)
  double depth = 0.0;    // -Z_c
  ProjectionStatus status = ProjectionStatus::BehindCamera;

  bool in_frame() const { return status == ProjectionStatus::InFrame; }
};

// R = Rz(kappa) * Ry(phi) * Rx(omega), with
//   Rx = [1 0 0; 0 c s; 0 -s c]
//   Ry = [c 0 -s; 0 1 0; s 0 c]
//   Rz = [c s 0; -s c 0; 0 0 1]
Mat3 rotation_from_euler(double omega, double phi, double kappa);

// R (M - S)
Vec3 world_to_camera(const CameraPose& pose, const Vec3& world);

// Normalized (x, y) -> distorted (x', y'):
//   r = x^2 + y^2
//   d_r  = 1 + k1 r + k2 r^2 + k3 r^3 + k4 r^4 + k5 r^5
//   d_tx = p1 (r + 2x^2) + 2 p2 x y (1 + p3 r + p4 r^2)
//   d_ty = p2 (r + 2y^2) + 2 p1 x y (1 + p3 r + p4 r^2)
// Note r is the squared radius.
Vec2 distort(const CameraIntrinsics& intr, const Vec2& xy);

// Jacobian d(x', y') / d(x, y) of distort().
Eigen::Matrix2d distort_jacobian(const CameraIntrinsics& intr, const Vec2& xy);

// Newton inverse of distort(). Throws ConvergenceError if the residual does
// not drop below `tolerance` within `max_iterations`.
Vec2 undistort(const CameraIntrinsics& intr, const Vec2& distorted, double tolerance = 1e-14,
               int max_iterations = 50);

// Distorted normalized coordinates -> continuous pixel coordinates.
Vec2 to_pixel(const CameraIntrinsics& intr, const Vec2& distorted);

// Full world -> pixel chain. Points with Z_c >= 0 are BehindCamera; the
// frame test is half-open: 0 <= f_x < width, 0 <= f_y < height.
ProjectionResult project(const CameraIntrinsics& intr, const CameraPose& pose, const Vec3& world);

inline ProjectionResult project(const Camera& cam, const Vec3& world) {
  return project(cam.intrinsics, cam.pose, world);
}

}  // namespace gridfuse
