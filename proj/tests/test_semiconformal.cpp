#include <doctest.h>

#include <numbers>
#include <random>

#include "sfr/semiconformal.hpp"
#include "testing.hpp"

using namespace sfr;

namespace {

constexpr double kPi = std::numbers::pi;

SurfaceMap map_of(const ChartGrid& g, const std::function<cplx(const Vec3&)>& fn, Codomain c = Codomain::Plane) {
    return {sample<cplx>(g, fn), c};
}

cplx circle_phi(const Vec3& x) { return cplx(std::hypot(x[0], x[1]), x[2]); }

VectorField circle_U(const ChartGrid& g) {
    return sample<Vec3>(g, [](const Vec3& x) {
        const double r = std::hypot(x[0], x[1]);
        return Vec3(-x[1] / r, x[0] / r, 0);
    });
}

// arg in [0, 2 pi)
double arg0(double x, double y) {
    const double a = std::atan2(y, x);
    return a < 0 ? a + 2 * kPi : a;
}

MetricField random_metric(const ChartGrid& g, std::uint64_t seed) {
    std::mt19937_64 r(seed);
    testing::SmoothMetric sm(r, 0.15, 1.5);
    return make_metric(sample<Mat3>(g, [&](const Vec3& x) { return sm.value(0, x); }));
}

// stereographic projection of x/|x| from the south pole
cplx stereo(const Vec3& x) { return cplx(x[0], x[1]) / (x.norm() + x[2]); }

// mask[q] for every q within `r` index steps of p on each bounded axis
bool all_valid_near(const ChartGrid& g, const std::vector<char>& mask, std::size_t p, int r) {
    const auto c = g.ijk(p);
    for (int i = std::max(0, c[0] - r); i <= std::min(g.n(0) - 1, c[0] + r); ++i)
        for (int j = std::max(0, c[1] - r); j <= std::min(g.n(1) - 1, c[1] + r); ++j)
            for (int k = std::max(0, c[2] - r); k <= std::min(g.n(2) - 1, c[2] + r); ++k)
                if (!mask[g.index(i, j, k)]) return false;
    return true;
}

}  // namespace

TEST_CASE("semi-conformal analysis of simple maps") {
    const ChartGrid g = make_box(0.5, 1.5, 17);
    const MetricField m = flat_metric(g);
    auto a = sc_analysis(map_of(g, [](const Vec3& x) { return cplx(x[1], x[2]); }), m);
    for (std::size_t p = 0; p < g.size(); ++p) {
        CHECK(std::abs(a.lambda1[p] - 1) < 1e-12);
        CHECK(std::abs(a.lambda2[p] - 1) < 1e-12);
        CHECK(a.defect[p] < 1e-24);
    }
    a = sc_analysis(map_of(g, [](const Vec3& x) { return cplx(2 * x[1], x[2]); }), m);
    for (std::size_t p = 0; p < g.size(); ++p) {
        CHECK(std::abs(a.lambda1[p] - 2) < 1e-12);
        CHECK(std::abs(a.lambda2[p] - 1) < 1e-12);
        CHECK(std::abs(a.defect[p] - 0.5) < 1e-12);
        CHECK(std::abs(a.energy[p] - a.jacobian[p] - a.defect[p]) < 1e-12);
    }
    a = sc_analysis(map_of(g, circle_phi), m);
    CHECK(testing::interior_max(g, 2, [&](std::size_t p) { return std::abs(a.lambda1[p] - 1); }) < 1e-5);
    CHECK(testing::interior_max(g, 2, [&](std::size_t p) { return std::abs(a.lambda2[p] - 1); }) < 1e-5);
    // radial projection to the sphere: dilation 1/|x|
    a = sc_analysis(map_of(g, stereo, Codomain::Sphere), m);
    CHECK(testing::interior_max(g, 2, [&](std::size_t p) { return std::abs(a.lambda1[p] * g.point(p).norm() - 1); }) <
          1e-5);
    CHECK(testing::interior_max(g, 2, [&](std::size_t p) { return a.defect[p]; }) < 1e-10);
}

TEST_CASE("defect is nonnegative and equals energy minus jacobian") {
    const ChartGrid g = make_box(0.0, 1.0, 9);
    std::mt19937_64 r(3);
    for (int trial = 0; trial < 5; ++trial) {
        testing::SmoothScalar u(r, 0.0, 1.0, 3), v(r, 0.0, 1.0, 3);
        const MetricField m = random_metric(g, 100 + trial);
        const auto a = sc_analysis(map_of(g, [&](const Vec3& x) { return cplx(u.value(0, x), v.value(0, x)); }), m);
        for (std::size_t p = 0; p < g.size(); ++p) {
            CHECK(a.defect[p] >= 0.0);
            CHECK(a.lambda1[p] >= a.lambda2[p]);
            CHECK(std::abs(a.energy[p] - a.jacobian[p] - a.defect[p]) < 1e-10 * (1 + a.energy[p]));
        }
    }
}

TEST_CASE("functional I") {
    const ChartGrid g = make_box(0.0, 1.0, 9);
    const MetricField m = flat_metric(g);
    CHECK(std::abs(functional_I(map_of(g, [](const Vec3& x) { return cplx(2 * x[1], x[2]); }), m) -
                   std::pow(0.5, 1.5)) < 1e-12);
    const ChartGrid gc = make_box(0.5, 1.5, 17);
    CHECK(functional_I(map_of(gc, circle_phi), flat_metric(gc)) < 1e-10);

    // conformal invariance for a random metric, map and conformal factor
    std::mt19937_64 r(8);
    for (int trial = 0; trial < 3; ++trial) {
        testing::SmoothScalar u(r, 0.0, 1.0, 3), v(r, 0.0, 1.0, 3), om(r, 1.0, 0.3, 3);
        const MetricField m1 = random_metric(g, 200 + trial);
        TensorField g2 = m1.g;
        for (std::size_t p = 0; p < g.size(); ++p) g2[p] *= std::pow(om.value(0, g.point(p)), 2);
        const MetricField m2 = make_metric(g2);
        const auto phi = map_of(g, [&](const Vec3& x) { return cplx(u.value(0, x), v.value(0, x)); });
        const double I1 = functional_I(phi, m1), I2 = functional_I(phi, m2);
        CHECK(I1 > 1e-3);
        CHECK(std::abs(I1 - I2) / I1 < 1e-10);
    }
}

TEST_CASE("tension field") {
    const ChartGrid g = make_box(0.5, 1.5, 17);
    const MetricField m = flat_metric(g);
    auto tau = tension(map_of(g, [](const Vec3& x) { return cplx(x[0] + 2 * x[1], 3 * x[2] - x[0]); }), m);
    for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(tau[p]) < 1e-10);
    tau = tension(map_of(g, [](const Vec3& x) { return std::pow(cplx(x[1], x[2]), 2); }), m);
    for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(tau[p]) < 1e-9);

    auto circle_err = [&](int n) {
        const ChartGrid gg = make_box(0.5, 1.5, n);
        const auto t = tension(map_of(gg, circle_phi), flat_metric(gg));
        return testing::interior_max(gg, (n - 1) / 4, [&](std::size_t p) {
            const Vec3 x = gg.point(p);
            return std::abs(t[p] - 1.0 / std::hypot(x[0], x[1]));
        });
    };
    const double e1 = circle_err(17), e2 = circle_err(33);
    CHECK(e2 < 1e-5);
    CHECK(testing::order(e1, e2) > 3.0);

    // radial projection to the sphere is harmonic; the chart term is what makes it so
    auto sphere_err = [&](int n) {
        const ChartGrid gg = make_box(0.5, 1.5, n);
        const auto t = tension(map_of(gg, stereo, Codomain::Sphere), flat_metric(gg));
        return testing::interior_max(gg, (n - 1) / 4, [&](std::size_t p) { return std::abs(t[p]); });
    };
    const double s1 = sphere_err(17), s2 = sphere_err(33);
    MESSAGE("sphere tension ", s1, " ", s2);
    CHECK(s2 < 1e-4);
    CHECK(testing::order(s1, s2) > 3.0);
    // the chart term itself, on a map that is not conformal: w = x1 has tau = (-2 x1/(1 + x1^2), 0)
    const auto line = tension(map_of(g, [](const Vec3& x) { return cplx(x[0], 0); }, Codomain::Sphere), m);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double x1 = g.point(p)[0];
        CHECK(std::abs(line[p] - cplx(-2 * x1 / (1 + x1 * x1), 0)) < 1e-12);
    }
}

TEST_CASE("fundamental equation residual") {
    auto err = [&](int n) {
        const ChartGrid g = make_box(0.5, 1.5, n);
        const auto r = fund_residual(map_of(g, circle_phi), flat_metric(g), circle_U(g));
        return testing::interior_max(g, (n - 1) / 4, [&](std::size_t p) {
            REQUIRE(r.applicable[p]);
            return std::abs(r.residual[p]);
        });
    };
    const double e1 = err(17), e2 = err(33);
    CHECK(e2 < 1e-5);
    CHECK(testing::order(e1, e2) > 3.0);

    const ChartGrid g = make_box(0.5, 1.5, 9);
    const auto r = fund_residual(map_of(g, [](const Vec3& x) { return cplx(x[1], x[2]); }), flat_metric(g),
                                 VectorField(g, Vec3(1, 0, 0)));
    for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(r.residual[p]) < 1e-12);
    // non-conformal map: flagged
    const auto bad = fund_residual(map_of(g, [](const Vec3& x) { return cplx(2 * x[1], x[2]); }), flat_metric(g),
                                   VectorField(g, Vec3(1, 0, 0)));
    CHECK(bad.applicable[0] == 0);
}

TEST_CASE("charge of radial projection") {
    ChargeInputs in;
    in.lambda = [](const Vec3& x) { return 1.0 / x.norm(); };
    in.U = [](const Vec3& x) { return Vec3(x.normalized()); };
    in.singular_distance = [](const Vec3& x) { return x.norm(); };
    const double q1 = charge_Q(in, sphere_mesh(Vec3::Zero(), 1.0));
    const double q2 = charge_Q(in, sphere_mesh(Vec3::Zero(), 2.5));
    CHECK(std::abs(q1 - 4 * kPi) / (4 * kPi) < 1e-12);
    CHECK(std::abs(q1 - q2) < 1e-12);
    // homologous surface: off-centre ellipsoid around the origin
    const double q3 = charge_Q(in, ellipsoid_mesh(Vec3(0.2, -0.1, 0.3), Vec3(1.0, 1.5, 0.8), 96, 192));
    CHECK(std::abs(q3 - 4 * kPi) / (4 * kPi) < 1e-6);
    // surface not enclosing the singularity
    CHECK(std::abs(charge_Q(in, sphere_mesh(Vec3(3, 0, 0), 1.0))) < 1e-10);
    // surface through the singular set
    CHECK_THROWS_AS(charge_Q(in, sphere_mesh(Vec3(1, 0, 0), 1.0)), DomainError);

    // conformal metric Omega^2 delta with unit U/Omega and dilation lambda/Omega
    auto om = [](const Vec3& x) { return 1.0 + 0.3 * std::sin(x[0]) * std::cos(2 * x[1]) + 0.1 * x[2] * x[2]; };
    ChargeInputs c = in;
    c.lambda = [&](const Vec3& x) { return 1.0 / (x.norm() * om(x)); };
    c.U = [&](const Vec3& x) { return Vec3(x.normalized() / om(x)); };
    c.g = [&](const Vec3& x) { return Mat3(om(x) * om(x) * Mat3::Identity()); };
    CHECK(std::abs(charge_Q(c, sphere_mesh(Vec3::Zero(), 1.3)) - 4 * kPi) < 1e-10);

    // tangent field gives zero
    ChargeInputs t = in;
    t.U = [](const Vec3& x) { return Vec3(Vec3(-x[1], x[0], 0).normalized()); };
    CHECK(std::abs(charge_Q(t, sphere_mesh(Vec3::Zero(), 1.0))) < 1e-12);
}

TEST_CASE("charge from grid fields and on tori") {
    const ChartGrid g = make_box(-2.0, 2.0, 41);
    const auto lam = sample<double>(g, [](const Vec3& x) { return 1.0 / std::max(x.norm(), 1e-3); });
    const auto U = sample<Vec3>(g, [](const Vec3& x) { return x.norm() > 0 ? Vec3(x.normalized()) : Vec3(1, 0, 0); });
    const double q = charge_Q(lam, U, flat_metric(g), sphere_mesh(Vec3::Zero(), 1.5));
    CHECK(std::abs(q - 4 * kPi) / (4 * kPi) < 1e-4);
    CHECK_THROWS_AS(charge_Q(lam, U, flat_metric(g), sphere_mesh(Vec3::Zero(), 3.0)), DomainError);

    // circle example: lambda = 1, U azimuthal; lambda^2 U is divergence free off the axis, and two
    // tori crossing the fibres carry the same (zero) charge
    ChargeInputs in;
    in.lambda = [](const Vec3&) { return 1.0; };
    in.U = [](const Vec3& x) { return Vec3(Vec3(-x[1], x[0], 0).normalized()); };
    in.singular_distance = [](const Vec3& x) { return std::hypot(x[0], x[1]); };
    const double a = charge_Q(in, torus_mesh(Vec3(2, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 1), 0.8, 0.3));
    const double b = charge_Q(in, torus_mesh(Vec3(0, 3, 0.5), Vec3(0, 1, 0), Vec3(1, 1, 1), 1.0, 0.4));
    CHECK(std::abs(a - b) < 1e-10);
    // a torus around the singular axis encloses none of it: also zero
    CHECK(std::abs(charge_Q(in, torus_mesh(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), 2.0, 0.5))) < 1e-10);
}

TEST_CASE("torus orientation is outward") {
    ChargeInputs in;
    in.lambda = [](const Vec3&) { return 1.0; };
    // divergence 3: flux equals 3 * volume = 3 * 2 pi^2 R r^2
    in.U = [](const Vec3& x) { return x; };
    const double R = 2.0, r = 0.5;
    const double q = charge_Q(in, torus_mesh(Vec3(0.3, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), R, r));
    CHECK(std::abs(q - 3 * 2 * kPi * kPi * R * r * r) < 1e-9);
}

TEST_CASE("phi rate for the circle example") {
    // full circles: Sigma = {x2 = 0, x1 > 0}, d phi/dt = -arg(x1 + i x2) with arg in [0, 2 pi)
    const auto g = make_grid({Axis{-2.5, 2.5, 41}, Axis{-2.5, 2.5, 41}, Axis{0, 1, 7}});
    const Slice s = make_slice(0.0, flat_metric(g), circle_U(g), Lapse{});
    const SliceSurface sig{1, 0.0, 0, 0.0};
    const auto r = phi_rate(map_of(g, circle_phi), s, sig);
    double e = 0;
    int n = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const Vec3 x = g.point(p);
        const double rho = std::hypot(x[0], x[1]);
        if (rho < 1.0 || rho > 2.0) continue;
        REQUIRE(r.valid[p]);
        // on the cut the backward curve starts on Sigma
        const double expect = -arg0(x[0], x[1]);
        e = std::max(e, std::abs(r.dphi_dt[p] - expect));
        ++n;
    }
    MESSAGE("phi rate error ", e, " over ", n, " points");
    CHECK(e < 1e-3);
    // corner points: the circle leaves the chart
    CHECK(r.valid[g.index(0, 0, 0)] == 0);
    CHECK_THROWS_AS(phi_rate(map_of(g, circle_phi), s, SliceSurface{1, 0.0, 1, 0.0}), SchemaError);
}

TEST_CASE("phi rate converges") {
    auto err = [](int n) {
        const auto g = make_grid({Axis{0.8, 2.0, n}, Axis{0.0, 1.2, n}, Axis{0, 1, 7}});
        const Slice s = make_slice(0.0, flat_metric(g), circle_U(g), Lapse{});
        const auto r = phi_rate(map_of(g, circle_phi), s, SliceSurface{1, 0.0, 0, 0.0});
        double e = 0;
        for (std::size_t p = 0; p < g.size(); ++p)
            if (r.valid[p]) e = std::max(e, std::abs(r.dphi_dt[p] + arg0(g.point(p)[0], g.point(p)[1])));
        return e;
    };
    const double e1 = err(17), e2 = err(33);
    MESSAGE("phi rate ", e1, " ", e2);
    CHECK(e2 < 1e-5);
    CHECK(testing::order(e1, e2) > 3.0);
}

TEST_CASE("evolved phi keeps its fibres along the evolved field") {
    // circle example in the polar chart (rho, theta, z): phi = rho + i z, U = d_theta / rho, Sigma = {theta = 0}
    const auto g = make_grid({Axis{1.0, 2.0, 33}, Axis{0.0, 1.0, 33}, Axis{0, 1, 9}});
    const MetricField m = make_metric(
        sample<Mat3>(g, [](const Vec3& x) { return Mat3(Vec3(1, x[0] * x[0], 1).asDiagonal()); }));
    const Slice s0 = make_slice(0.0, m, sample<Vec3>(g, [](const Vec3& x) { return Vec3(0, 1 / x[0], 0); }), Lapse{});
    FlowSpec spec;
    spec.dt = 5e-3;
    spec.t_end = 0.05;
    spec.store_every = 5;
    const auto traj = evolve(s0, spec);
    REQUIRE_FALSE(traj.halted);
    PhiEvolutionOptions opt;
    opt.reach = 3.0;
    const auto st = evolve_phi(map_of(g, [](const Vec3& x) { return cplx(x[0], x[2]); }), traj, SliceSurface{1, 0.0},
                               opt);
    REQUIRE(st.maps.size() == traj.slices.size());
    const Slice& last = traj.slices.back();
    const SurfaceMap& phi = st.maps.back();
    const auto dU = apply_dphi(phi, last.U);
    const auto grad = gradient(phi.w);
    double e = 0;
    int n = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!all_valid_near(g, st.valid.back(), p, 2) || g.boundary_distance(p) < 4) continue;
        const double norm = std::sqrt(std::norm(grad[0][p]) + std::norm(grad[1][p]) + std::norm(grad[2][p]));
        e = std::max(e, std::abs(dU[p]) / norm);
        ++n;
    }
    MESSAGE("fibre residual ", e, " over ", n, " points");
    CHECK(n > 500);
    CHECK(e < 1e-4);
    // the map changed, so the check is not vacuous
    const std::size_t c = g.index(16, 16, 4);
    CHECK(std::abs(phi.w[c] - st.maps.front().w[c]) > 1e-3);
    // and the fibres did too: the initial map is no longer constant along U
    CHECK(std::abs(apply_dphi(st.maps.front(), last.U)[c]) > 1e-3);
}

TEST_CASE("evolution residual and the conformal gauge") {
    const auto g = make_grid({Axis{0.8, 2.0, 33}, Axis{0.0, 1.2, 33}, Axis{0, 1, 7}});
    const Slice s = make_slice(0.0, flat_metric(g), circle_U(g), Lapse{});
    const SurfaceMap phi = map_of(g, circle_phi);
    const ComplexField rate = sample<cplx>(g, [](const Vec3& x) { return cplx(-arg0(x[0], x[1]), 0); });
    auto interior = [&](const ComplexField& f) {
        return testing::interior_max(g, 8, [&](std::size_t p) { return std::abs(f[p]); });
    };
    CHECK(interior(evolution_residual(phi, rate, s)) < 1e-5);

    // psi = exp(phi) is conformal post-composition: d psi/dt = exp(phi) d phi/dt solves the same law
    SurfaceMap psi = phi;
    ComplexField prate = rate;
    for (std::size_t p = 0; p < g.size(); ++p) {
        psi.w[p] = std::exp(phi.w[p]);
        prate[p] = psi.w[p] * rate[p];
    }
    CHECK(interior(evolution_residual(psi, prate, s)) < 1e-4);

    // non-conformal f(w) = w + 0.2 |w|^2: residual is lambda^2 tau(f) = 0.8 (lambda = 1)
    SurfaceMap chi = phi;
    ComplexField crate = rate;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const cplx w = phi.w[p];
        chi.w[p] = w + 0.2 * std::norm(w);
        crate[p] = rate[p] + 0.4 * (w.real() * rate[p].real() + w.imag() * rate[p].imag());
    }
    const auto rc = evolution_residual(chi, crate, s);
    CHECK(testing::interior_max(g, 2, [&](std::size_t p) { return std::abs(rc[p] - 0.8); }) < 1e-4);
}
