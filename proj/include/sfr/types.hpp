#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <stdexcept>
#include <string>

namespace sfr {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using CVec3 = Eigen::Vector3cd;

// Gamma[k](i, j) = Gamma^k_ij
struct Christoffel3 {
    std::array<Mat3, 3> G{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
    Vec3 contract(const Vec3& a, const Vec3& b) const {
        return {a.dot(G[0] * b), a.dot(G[1] * b), a.dot(G[2] * b)};
    }
    Christoffel3& operator+=(const Christoffel3& o) {
        for (int k = 0; k < 3; ++k) G[k] += o.G[k];
        return *this;
    }
};
inline Christoffel3 operator*(double s, const Christoffel3& c) {
    Christoffel3 r;
    for (int k = 0; k < 3; ++k) r.G[k] = s * c.G[k];
    return r;
}
inline Christoffel3 operator+(Christoffel3 a, const Christoffel3& b) { return a += b; }

struct Christoffel4 {
    std::array<Mat4, 4> G{Mat4::Zero(), Mat4::Zero(), Mat4::Zero(), Mat4::Zero()};
    Christoffel4& operator+=(const Christoffel4& o) {
        for (int k = 0; k < 4; ++k) G[k] += o.G[k];
        return *this;
    }
};
inline Christoffel4 operator*(double s, const Christoffel4& c) {
    Christoffel4 r;
    for (int k = 0; k < 4; ++k) r.G[k] = s * c.G[k];
    return r;
}
inline Christoffel4 operator+(Christoffel4 a, const Christoffel4& b) { return a += b; }

// R[d][a][b][c] = R^d_abc, R(d_a, d_b) d_c = R^d_abc d_d
struct Riemann3 {
    std::array<double, 81> R{};
    double& operator()(int d, int a, int b, int c) { return R[((d * 3 + a) * 3 + b) * 3 + c]; }
    double operator()(int d, int a, int b, int c) const { return R[((d * 3 + a) * 3 + b) * 3 + c]; }
};

struct Riemann4 {
    std::array<double, 256> R{};
    double& operator()(int d, int a, int b, int c) { return R[((d * 4 + a) * 4 + b) * 4 + c]; }
    double operator()(int d, int a, int b, int c) const { return R[((d * 4 + a) * 4 + b) * 4 + c]; }
};

// T[i][j][k] for rank-3 arrays such as R^0_ijk
struct Rank3 {
    std::array<double, 27> v{};
    double& operator()(int i, int j, int k) { return v[(i * 3 + j) * 3 + k]; }
    double operator()(int i, int j, int k) const { return v[(i * 3 + j) * 3 + k]; }
};

enum class ErrorKind { Domain, Degenerate, Schema, Breach };

class Error : public std::runtime_error {
public:
    Error(ErrorKind k, const std::string& msg) : std::runtime_error(msg), kind_(k) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct DomainError : Error {
    explicit DomainError(const std::string& m) : Error(ErrorKind::Domain, m) {}
};
struct DegeneracyError : Error {
    explicit DegeneracyError(const std::string& m) : Error(ErrorKind::Degenerate, m) {}
};
struct SchemaError : Error {
    explicit SchemaError(const std::string& m) : Error(ErrorKind::Schema, m) {}
};

inline Mat3 sym(const Mat3& m) { return 0.5 * (m + m.transpose()); }

}  // namespace sfr
