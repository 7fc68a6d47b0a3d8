#include "pinch/config.hpp"
#include "pinch/controller.hpp"
#include "pinch/dynamics.hpp"
#include "pinch/scenario.hpp"

#include <boost/numeric/odeint.hpp>
#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

using namespace pinch;

namespace {

Joint planar_link(double length, double com, double mass, double inertia_z)
{
    Joint j;
    j.axis = Vec3::UnitZ();
    j.offset = Vec3(length, 0, 0);
    j.com = Vec3(com, 0, 0);
    j.mass = mass;
    j.inertia = Vec3(1e-9, inertia_z, inertia_z).asDiagonal();
    return j;
}

Scene free_scene(const FingerChain& a, const FingerChain& b)
{
    Scene scene;
    scene.fingers = {a, b};
    scene.shape = Sphere{0.024};
    return scene;
}

SystemState rest_state(const Scene& scene)
{
    SystemState s;
    for (std::size_t i = 0; i < 2; ++i) {
        s.fingers[i] = JointState::zeros(scene.fingers[i].dof());
    }
    s.object.position = Vec3(1.0, 1.0, 1.0);
    s.object.inertia_body = Mat3::Identity() * 1e-6;
    return s;
}

// Textbook two-link planar arm (no gravity) used as the independent reference.
struct TwoLink {
    double m1, m2, l1, lc1, lc2, i1, i2;

    void operator()(const std::array<double, 4>& x, std::array<double, 4>& dx, double) const
    {
        const double c2 = std::cos(x[1]);
        const double s2 = std::sin(x[1]);
        const double m11 = m1 * lc1 * lc1 + i1 + m2 * (l1 * l1 + lc2 * lc2 + 2 * l1 * lc2 * c2) + i2;
        const double m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2) + i2;
        const double m22 = m2 * lc2 * lc2 + i2;
        const double h = m2 * l1 * lc2 * s2;
        const double c1 = -h * (2 * x[2] * x[3] + x[3] * x[3]);
        const double cc2 = h * x[2] * x[2];
        const double det = m11 * m22 - m12 * m12;
        dx[0] = x[2];
        dx[1] = x[3];
        dx[2] = (m22 * -c1 - m12 * -cc2) / det;
        dx[3] = (-m12 * -c1 + m11 * -cc2) / det;
    }
};

double two_link_error(double dt, double horizon)
{
    const TwoLink ref{0.3, 0.2, 0.25, 0.12, 0.1, 2e-3, 1e-3};
    FingerChain arm;
    arm.joints = {planar_link(ref.l1, ref.lc1, ref.m1, ref.i1), planar_link(0.2, ref.lc2, ref.m2, ref.i2)};
    FingerChain other;
    other.joints = {planar_link(0.1, 0.05, 0.1, 1e-4)};
    const Scene scene = free_scene(arm, other);
    SystemState s = rest_state(scene);
    s.fingers[0].q = Vec2(0.3, 0.8);
    s.fingers[0].qdot = Vec2(1.5, -2.0);

    const long steps = std::lround(horizon / dt);
    const Controls u = Controls::zeros(scene);
    for (long k = 0; k < steps; ++k) {
        s = step(scene, s, u, FrictionParams{}, dt, nullptr).state;
    }

    std::array<double, 4> x{0.3, 0.8, 1.5, -2.0};
    boost::numeric::odeint::integrate_adaptive(
        boost::numeric::odeint::make_controlled<boost::numeric::odeint::runge_kutta_dopri5<std::array<double, 4>>>(
            1e-12, 1e-12),
        ref, x, 0.0, horizon, 1e-4);
    return std::max(std::abs(s.fingers[0].q[0] - x[0]), std::abs(s.fingers[0].q[1] - x[1]));
}

} // namespace

TEST(MassMatrix, SingleLinkPendulum)
{
    const double m = 0.2;
    const double len = 0.3;
    FingerChain chain;
    chain.joints = {planar_link(len, len / 2, m, m * len * len / 12)};
    for (double q : {0.0, 0.7, -2.1}) {
        EXPECT_NEAR(mass_matrix(chain, VecX::Constant(1, q))(0, 0), m * len * len / 3, 1e-14);
    }
}

TEST(MassMatrix, TwoLinkClosedForm)
{
    const TwoLink ref{0.3, 0.2, 0.25, 0.12, 0.1, 2e-3, 1e-3};
    FingerChain arm;
    arm.joints = {planar_link(ref.l1, ref.lc1, ref.m1, ref.i1), planar_link(0.2, ref.lc2, ref.m2, ref.i2)};
    for (double q2 : {0.0, 0.4, 2.5}) {
        const MatX m = mass_matrix(arm, Vec2(0.9, q2));
        const double c2 = std::cos(q2);
        EXPECT_NEAR(m(0, 0), ref.m1 * ref.lc1 * ref.lc1 + ref.i1
                                 + ref.m2 * (ref.l1 * ref.l1 + ref.lc2 * ref.lc2 + 2 * ref.l1 * ref.lc2 * c2) + ref.i2,
                    1e-14);
        EXPECT_NEAR(m(0, 1), ref.m2 * (ref.lc2 * ref.lc2 + ref.l1 * ref.lc2 * c2) + ref.i2, 1e-14);
        EXPECT_NEAR(m(1, 1), ref.m2 * ref.lc2 * ref.lc2 + ref.i2, 1e-14);
    }
}

TEST(MassMatrix, SymmetricPositiveDefiniteOnRandomPostures)
{
    const FingerChain chain = default_finger(Vec3::Zero(), Mat3::Identity(), Vec3::UnitX());
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 1000; ++k) {
        const VecX q = Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng));
        const MatX m = mass_matrix(chain, q);
        ASSERT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-15);
        ASSERT_GT(Eigen::SelfAdjointEigenSolver<MatX>(m).eigenvalues().minCoeff(), 0.0);
    }
}

TEST(Coriolis, VanishesAtRest)
{
    const FingerChain chain = default_finger(Vec3::Zero(), Mat3::Identity(), Vec3::UnitX());
    EXPECT_EQ(coriolis(chain, Eigen::Vector4d(0.1, 0.2, 0.3, 0.4), VecX::Zero(4)).norm(), 0.0);
}

TEST(Coriolis, PowerIdentity)
{
    // qdot^T (C qdot) = 1/2 qdot^T Mdot qdot for the Christoffel form.
    const FingerChain chain = default_finger(Vec3::Zero(), Mat3::Identity(), Vec3::UnitX());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 50; ++k) {
        const VecX q = Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng));
        const VecX qd = Eigen::Vector4d(u(rng), u(rng), u(rng), u(rng));
        const double h = 1e-6;
        const MatX mdot = (mass_matrix(chain, q + h * qd) - mass_matrix(chain, q - h * qd)) / (2 * h);
        const double lhs = qd.dot(coriolis(chain, q, qd));
        const double rhs = 0.5 * qd.dot(mdot * qd);
        EXPECT_NEAR(lhs, rhs, 1e-8 * std::max(1.0, std::abs(rhs)) + 1e-12);
    }
}

TEST(Coriolis, TwoLinkClosedForm)
{
    const TwoLink ref{0.3, 0.2, 0.25, 0.12, 0.1, 2e-3, 1e-3};
    FingerChain arm;
    arm.joints = {planar_link(ref.l1, ref.lc1, ref.m1, ref.i1), planar_link(0.2, ref.lc2, ref.m2, ref.i2)};
    const Vec2 q(0.2, 1.1);
    const Vec2 qd(0.7, -1.3);
    const VecX c = coriolis(arm, q, qd);
    const double h = ref.m2 * ref.l1 * ref.lc2 * std::sin(q[1]);
    EXPECT_NEAR(c[0], -h * (2 * qd[0] * qd[1] + qd[1] * qd[1]), 1e-9);
    EXPECT_NEAR(c[1], h * qd[0] * qd[0], 1e-9);
}

TEST(Step, TwoLinkArmMatchesReferenceIntegrator)
{
    const double coarse = two_link_error(2e-6, 0.2);
    const double fine = two_link_error(1e-6, 0.2);
    EXPECT_LT(fine, 1e-6);
    // First-order method: halving dt roughly halves the error.
    EXPECT_GT(coarse / fine, 1.6);
    EXPECT_LT(coarse / fine, 2.4);
}

TEST(Step, FreeBodiesAtRestStayAtRest)
{
    const Scene scene = ScenarioConfig(builtin_scene("cube")).scene();
    SystemState s = builtin_scene("cube").initial_state();
    const Solution sol = assemble_and_solve(scene, s, nullptr, Controls::zeros(scene), FrictionParams{});
    EXPECT_EQ(sol.acceleration.norm(), 0.0);
    EXPECT_FALSE(sol.multipliers.active);
}

TEST(Step, BallisticObject)
{
    const ScenarioConfig c = builtin_scene("sphere");
    const Scene scene = c.scene();
    SystemState s = c.initial_state();
    s.object.velocity = Vec3(0.1, 0, 0);
    const Vec3 p0 = s.object.position;
    const double dt = 1e-3;
    for (int k = 0; k < 10; ++k) {
        s = step(scene, s, Controls::zeros(scene), FrictionParams{}, dt, nullptr).state;
    }
    EXPECT_LT((s.object.position - p0 - Vec3(1e-3, 0, 0)).norm(), 1e-15);
    EXPECT_LT((s.object.velocity - Vec3(0.1, 0, 0)).norm(), 1e-15);
}

TEST(Step, LinearImpulseOnObject)
{
    const ScenarioConfig c = builtin_scene("cube");
    const Scene scene = c.scene();
    SystemState s = c.initial_state();
    Controls u = Controls::zeros(scene);
    u.object_force = Vec3(0, 0, 2.1e-3);
    s = step(scene, s, u, FrictionParams{}, 1e-3, nullptr).state;
    EXPECT_NEAR(s.object.velocity.z(), 1e-3, 1e-15);
}

namespace {

// Equilibrium grasp of the cube preset, reached by simulating it.
struct CubeGrasp {
    ScenarioConfig config = builtin_scene("cube");
    Scene scene;
    SystemState state;

    CubeGrasp()
    {
        config.simulation.duration = 1.0;
        config.output.clear();
        scene = config.scene();
        const RunSummary r = run(config);
        state = r.final_state;
    }
};

const CubeGrasp& cube_grasp()
{
    static const CubeGrasp g;
    return g;
}

Controls grasp_controls(const Scene& scene, const SystemState& s, const ContactGeometry& g,
                        const ControllerParams& cp)
{
    GraspInputs in;
    for (std::size_t i = 0; i < 2; ++i) {
        in.qdot[i] = s.fingers[i].qdot;
        in.tip_position[i] = g.fingers[i].tip.position;
        in.jac[i] = g.fingers[i].jac;
        in.sensed[i] = g.fingers[i].query.frame;
    }
    in.angles = relative_angles(s.rolling);
    Controls u = Controls::zeros(scene);
    u.torque = {grasp_torque(0, in, cp), grasp_torque(1, in, cp)};
    u.damping = cp.damping;
    return u;
}

} // namespace

TEST(Grasp, CubeEquilibriumIsStatic)
{
    const CubeGrasp& cg = cube_grasp();
    SystemState s = cg.state;
    set_generalized_velocity(cg.scene, s, VecX::Zero(cg.scene.dof()));
    const ContactGeometry g = contact_geometry(cg.scene, s);
    const Controls u = grasp_controls(cg.scene, s, g, cg.config.controller);
    const Solution sol = assemble_and_solve(cg.scene, s, &g, u, cg.config.friction);
    ASSERT_TRUE(sol.multipliers.active);
    EXPECT_LT(sol.acceleration.norm(), 1e-6);
    for (std::size_t i = 0; i < 2; ++i) {
        const double f = detail::contact_force_magnitude(g.fingers[i].query.frame, sol.multipliers.normal[i],
                                                 sol.multipliers.tangential[i]);
        EXPECT_NEAR(f, cg.config.controller.desired_force, 1e-6);
    }
}

TEST(Grasp, AccelerationsSatisfyConstraintRows)
{
    // A^T xddot = b exactly, for an arbitrary admissible velocity.
    const CubeGrasp& cg = cube_grasp();
    SystemState s = cg.state;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 0.05);
    VecX v(cg.scene.dof());
    for (int k = 0; k < v.size(); ++k) {
        v[k] = n(rng);
    }
    set_generalized_velocity(cg.scene, s, v);
    project_velocities(cg.scene, s, contact_geometry(cg.scene, s));
    const ContactGeometry g = contact_geometry(cg.scene, s);
    const MatX a = constraint_matrix(cg.scene, g);
    EXPECT_LT((a.transpose() * generalized_velocity(cg.scene, s)).norm(), 1e-12);

    DynamicsOptions opt;
    const Controls u = grasp_controls(cg.scene, s, g, cg.config.controller);
    const Solution sol = assemble_and_solve(cg.scene, s, &g, u, cg.config.friction, opt);
    const Eigen::Matrix<double, 6, 1> b = -constraint_rate(cg.scene, s, opt.rate_step);
    Eigen::Matrix<double, 6, 1> expected = b;
    expected[0] += opt.baumgarte_beta * opt.baumgarte_beta * g.fingers[0].query.gap;
    expected[1] += opt.baumgarte_beta * opt.baumgarte_beta * g.fingers[1].query.gap;
    EXPECT_LT((a.transpose() * sol.acceleration - expected).norm(), 1e-9 * std::max(1.0, expected.norm()));
}

TEST(Grasp, UnforcedMotionConservesKineticEnergy)
{
    // Ideal rolling constraints do no work: with no torques, damping or
    // spin friction the kinetic energy is conserved up to integrator error.
    const CubeGrasp& cg = cube_grasp();
    const Scene& scene = cg.scene;
    SystemState s = cg.state;
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n(0.0, 0.02);
    VecX v(scene.dof());
    for (int k = 0; k < v.size(); ++k) {
        v[k] = n(rng);
    }
    set_generalized_velocity(scene, s, v);
    project_velocities(scene, s, contact_geometry(scene, s));
    auto kinetic = [&](const SystemState& x) {
        const VecX xd = generalized_velocity(scene, x);
        return 0.5 * xd.dot(system_mass_matrix(scene, x) * xd);
    };
    const double t0 = kinetic(s);
    FrictionParams none;
    none.spin = {Mat3::Zero(), Mat3::Zero()};
    const Controls u = Controls::zeros(scene);
    for (int k = 0; k < 2000; ++k) {
        const ContactGeometry g = contact_geometry(scene, s);
        const std::array<ContactFrame, 2> frames{g.fingers[0].query.frame, g.fingers[1].query.frame};
        s = step(scene, s, u, none, 1e-5, &frames).state;
    }
    EXPECT_GT(t0, 1e-6);
    EXPECT_NEAR(kinetic(s), t0, 2e-3 * t0);
}

TEST(Friction, SpinDampingMatchesDissipationFormula)
{
    const CubeGrasp& cg = cube_grasp();
    const Scene& scene = cg.scene;
    SystemState s = cg.state;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 1.0);
    const ContactGeometry g = contact_geometry(scene, s);
    FrictionParams fr;
    fr.spin = {Mat3::Identity() * 0.01, Mat3::Identity() * 0.03};
    const MatX b = spin_damping(scene, g, fr);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatX>(b).eigenvalues().minCoeff(), -1e-15);
    const Mat3 qs = spin_projection(g.line());
    for (int k = 0; k < 20; ++k) {
        VecX v(scene.dof());
        for (int j = 0; j < v.size(); ++j) {
            v[j] = n(rng);
        }
        set_generalized_velocity(scene, s, v);
        double w = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const Vec3 rel = relative_spin(g.fingers[i], s.fingers[i].qdot, s.object.angular_velocity);
            w += rel.dot(fr.spin[i] * qs * rel);
        }
        EXPECT_NEAR(v.dot(b * v), w, 1e-12 * std::max(1.0, w));
    }
    fr.spin = {Mat3::Zero(), Mat3::Zero()};
    EXPECT_EQ(spin_damping(scene, g, fr).norm(), 0.0);
}

TEST(ConstraintRate, ZeroAtRest)
{
    const CubeGrasp& cg = cube_grasp();
    SystemState s = cg.state;
    set_generalized_velocity(cg.scene, s, VecX::Zero(cg.scene.dof()));
    EXPECT_EQ(constraint_rate(cg.scene, s).norm(), 0.0);
}

TEST(ConstraintRate, ObjectSlidingAlongFaceWithFixedFingers)
{
    // Pure object translation along a flat face leaves A unchanged.
    const CubeGrasp& cg = cube_grasp();
    SystemState s = cg.state;
    set_generalized_velocity(cg.scene, s, VecX::Zero(cg.scene.dof()));
    const ContactGeometry g = contact_geometry(cg.scene, s);
    s.object.velocity = g.fingers[0].query.frame.tx * 0.01;
    EXPECT_LT(constraint_rate(cg.scene, s).norm(), 1e-8);
}

TEST(ConstraintRate, SingleJointFingerOnSphereMatchesChainRule)
{
    // Tip on a circle of radius L around the z axis; the normal row of
    // A^T xdot is the rate of the gap rho - R - r with rho = |p - c|, so its
    // time derivative along the motion is rho'' qdot^2.
    const double len = 0.06;
    FingerChain a;
    a.joints = {planar_link(len, len / 2, 0.05, 1e-5)};
    a.tip_radius = 0.015;
    FingerChain b;
    b.base_position = Vec3(0.2, 0, 0);
    b.joints = {planar_link(-len, -len / 2, 0.05, 1e-5)};
    b.tip_radius = 0.015;
    Scene scene = free_scene(a, b);
    SystemState s = rest_state(scene);
    const Vec3 c(0.1, 0, 0);
    s.object.position = c;
    for (double q : {0.3, -0.2, 0.45}) {
        const double qd = 0.8;
        s.fingers[0].q = VecX::Constant(1, q);
        s.fingers[0].qdot = VecX::Constant(1, qd);
        const Vec3 p(len * std::cos(q), len * std::sin(q), 0);
        const Vec3 dp(-len * std::sin(q), len * std::cos(q), 0);
        const Vec3 ddp = -p;
        const double rho = (p - c).norm();
        const double drho = (p - c).dot(dp) / rho;
        const double ddrho = (dp.dot(dp) + (p - c).dot(ddp) - drho * drho) / rho;

        const MatX amat = constraint_matrix(scene, contact_geometry(scene, s));
        const double row = (amat.transpose() * generalized_velocity(scene, s))[0];
        ASSERT_NEAR(std::abs(row), std::abs(drho * qd), 1e-12);
        const double sign = row / (drho * qd);
        EXPECT_NEAR(constraint_rate(scene, s)[0], sign * ddrho * qd * qd, 1e-6);
    }
}

TEST(Projection, PositionsReturnToManifold)
{
    const CubeGrasp& cg = cube_grasp();
    SystemState s = cg.state;
    s.object.position += contact_geometry(cg.scene, s).fingers[0].query.frame.nz * 2e-4;
    s.fingers[1].q[1] -= 1e-3;
    const ContactGeometry g0 = contact_geometry(cg.scene, s);
    EXPECT_GT(std::abs(g0.fingers[0].query.gap), 1e-5);
    EXPECT_LT(project_positions(cg.scene, s), 1e-12);
    const ContactGeometry g = contact_geometry(cg.scene, s);
    EXPECT_LT(std::abs(g.fingers[0].query.gap), 1e-12);
    EXPECT_LT(std::abs(g.fingers[1].query.gap), 1e-12);
}

TEST(Kkt, SingularWhenNormalRowsAreDependent)
{
    // Both one-joint fingers meet a sphere head-on: the joints cannot move
    // the tips along the normals, so the two normal rows act only on the
    // object and are opposite vectors.
    const double len = 0.06;
    const double reach = 0.024 + 0.015;
    FingerChain a;
    a.joints = {planar_link(len, len / 2, 0.05, 1e-5)};
    FingerChain b;
    b.base_position = Vec3(2 * len + 2 * reach, 0, 0);
    b.joints = {planar_link(-len, -len / 2, 0.05, 1e-5)};
    const Scene scene = free_scene(a, b);
    SystemState s = rest_state(scene);
    s.object.position = Vec3(len + reach, 0, 0);
    const ContactGeometry g = contact_geometry(scene, s);
    try {
        assemble_and_solve(scene, s, &g, Controls::zeros(scene), FrictionParams{});
        FAIL() << "expected SingularKKT";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularKKT);
    }
}
