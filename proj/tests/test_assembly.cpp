#include "fraclap/assembly.hpp"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cstdlib>

using namespace fraclap;

namespace {

double max_rel_diff(const Matrix& A, const Matrix& B) {
    return (A - B).cwiseAbs().maxCoeff() / B.cwiseAbs().maxCoeff();
}

}  // namespace

class StiffnessOracle1D : public ::testing::TestWithParam<std::tuple<double, int>> {};

TEST_P(StiffnessOracle1D, MatchesTranslationForm) {
    const auto [s, cells] = GetParam();
    const Mesh m = build_interval_mesh(0.0, 1.0, cells);
    const Kernel K = Kernel::fractional(1, s);
    const auto sys = assemble_stiffness(m, K);
    const Matrix ref = oracle::stiffness_1d(s, 1.0, 0.0, 1.0, cells);
    for (int i = 0; i < ref.rows(); ++i)
        for (int j = 0; j < ref.cols(); ++j)
            EXPECT_NEAR(sys.A(i, j), ref(i, j), 1e-6 * std::abs(ref(i, j))) << "entry " << i << "," << j;
}

INSTANTIATE_TEST_SUITE_P(Orders, StiffnessOracle1D,
                         ::testing::Combine(::testing::Values(0.25, 0.5, 0.75), ::testing::Values(4, 8)));

TEST(Stiffness, SymmetricPositiveDefinite) {
    for (const Mesh& m : {build_interval_mesh(-1.0, 2.0, 9), build_rectangle_mesh({0, 1}, {0, 0.5}, 4, 3)}) {
        const auto sys = assemble_stiffness(m, Kernel::fractional(m.dim, 0.35));
        EXPECT_LE((sys.A - sys.A.transpose()).cwiseAbs().maxCoeff(), 1e-14 * sys.A.cwiseAbs().maxCoeff());
        const Eigen::SelfAdjointEigenSolver<Matrix> es(sys.A);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        EXPECT_EQ(sys.exterior_diag.size(), static_cast<Eigen::Index>(sys.size()));
        EXPECT_GT(sys.exterior_diag.minCoeff(), 0.0);
    }
}

TEST(Stiffness, LowerBoundConstantDoesNotScaleKernel) {
    // beta only enters the lower-bound check; the model kernel stays |z|^{-(n+2s)}
    const Mesh m = build_rectangle_mesh({0, 1}, {0, 1}, 3, 3);
    const auto one = assemble_stiffness(m, Kernel::fractional(2, 0.5, 1.0));
    const auto half = assemble_stiffness(m, Kernel::fractional(2, 0.5, 0.5));
    EXPECT_TRUE(one.A == half.A);
}

TEST(Stiffness, IndependentOfWorkerCount) {
    const Mesh m = build_rectangle_mesh({0, 1}, {0, 1}, 4, 4);
    const Kernel K = Kernel::fractional(2, 0.3);
    ::setenv("FRACLAP_THREADS", "1", 1);
    const Matrix a = assemble_stiffness(m, K).A;
    ::setenv("FRACLAP_THREADS", "4", 1);
    const Matrix b = assemble_stiffness(m, K).A;
    ::unsetenv("FRACLAP_THREADS");
    EXPECT_TRUE(a == b);
}

TEST(Stiffness, UniformMeshUsesFewPairClasses) {
    // translation classes on a uniform 1D mesh: one per element offset
    const auto sys = assemble_stiffness(build_interval_mesh(0.0, 1.0, 16), Kernel::fractional(1, 0.5));
    EXPECT_LE(sys.pair_classes, 16u);
}

TEST(Mass, MatchesUniformTridiagonal) {
    const int cells = 7;
    const double h = 2.0 / cells;
    const Matrix M = assemble_mass(build_interval_mesh(-1.0, 1.0, cells));
    for (int i = 0; i < M.rows(); ++i)
        for (int j = 0; j < M.cols(); ++j) {
            const double expect = i == j ? 4.0 * h / 6.0 : std::abs(i - j) == 1 ? h / 6.0 : 0.0;
            EXPECT_NEAR(M(i, j), expect, 1e-15);
        }
}
