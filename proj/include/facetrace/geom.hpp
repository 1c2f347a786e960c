#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace facetrace {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// Rodrigues exponential map: axis-angle vector -> rotation matrix.
inline Mat3 axis_angle_to_matrix(const Vec3& w)
{
    const double theta = w.norm();
    if (theta < 1e-12)
        return Mat3::Identity() + Eigen::Matrix3d{{0, -w.z(), w.y()},
                                                  {w.z(), 0, -w.x()},
                                                  {-w.y(), w.x(), 0}};
    return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

inline Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return m;
}

// dR/dw_i following Gallego & Yezzi, "A compact formula for the derivative
// of a 3-D rotation in exponential coordinates".
inline void axis_angle_jacobian(const Vec3& w, Mat3 dR[3])
{
    const double theta2 = w.squaredNorm();
    if (theta2 < 1e-16) {
        for (int i = 0; i < 3; ++i)
            dR[i] = skew(Vec3::Unit(i));
        return;
    }
    const Mat3 R = axis_angle_to_matrix(w);
    const Mat3 ImR = Mat3::Identity() - R;
    for (int i = 0; i < 3; ++i) {
        const Vec3 e = Vec3::Unit(i);
        dR[i] = (w(i) * skew(w) + skew(w.cross(ImR * e))) / theta2 * R;
    }
}

// Reflection of v about unit normal n (both pointing away from the surface).
inline Vec3 reflect(const Vec3& v, const Vec3& n)
{
    return 2.0 * n.dot(v) * n - v;
}

inline double luminance(const Vec3& rgb)
{
    return 0.2126 * rgb.x() + 0.7152 * rgb.y() + 0.0722 * rgb.z();
}

} // namespace facetrace
