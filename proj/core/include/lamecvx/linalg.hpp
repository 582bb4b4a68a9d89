#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace lamecvx {

using cplx = std::complex<double>;

struct Vec3 {
  std::array<double, 3> v{0.0, 0.0, 0.0};
  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }
};

struct Mat3 {
  // row-major 3x3
  std::array<double, 9> m{};
  double& operator()(int r, int c) { return m[static_cast<size_t>(3 * r + c)]; }
  double operator()(int r, int c) const { return m[static_cast<size_t>(3 * r + c)]; }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) a[i] += b[i];
  return a;
}
inline Vec3 operator-(Vec3 a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) a[i] -= b[i];
  return a;
}
inline Vec3 operator*(double s, Vec3 a) {
  for (int i = 0; i < 3; ++i) a[i] *= s;
  return a;
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  Vec3 c;
  c[0] = a[1] * b[2] - a[2] * b[1];
  c[1] = a[2] * b[0] - a[0] * b[2];
  c[2] = a[0] * b[1] - a[1] * b[0];
  return c;
}
inline Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
  return r;
}
inline Mat3 operator+(Mat3 a, const Mat3& b) {
  for (int i = 0; i < 9; ++i) a.m[static_cast<size_t>(i)] += b.m[static_cast<size_t>(i)];
  return a;
}
inline Mat3 operator-(Mat3 a, const Mat3& b) {
  for (int i = 0; i < 9; ++i) a.m[static_cast<size_t>(i)] -= b.m[static_cast<size_t>(i)];
  return a;
}
inline Mat3 operator*(double s, Mat3 a) {
  for (int i = 0; i < 9; ++i) a.m[static_cast<size_t>(i)] *= s;
  return a;
}
inline Mat3 identity3() {
  Mat3 r;
  r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
  return r;
}
/// Entrywise max norm, the matrix norm used throughout the geometric lemma.
inline double max_norm(const Mat3& a) {
  double m = 0.0;
  for (double x : a.m) m = std::max(m, std::abs(x));
  return m;
}
inline Mat3 transpose(const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(j, i);
  return r;
}
inline Vec3 mat_vec(const Mat3& a, const Vec3& x) {
  Vec3 r;
  for (int i = 0; i < 3; ++i) r[i] = a(i, 0) * x[0] + a(i, 1) * x[1] + a(i, 2) * x[2];
  return r;
}

}  // namespace lamecvx
