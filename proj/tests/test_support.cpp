#include "test_support.hpp"

#include "delayctl/numerics.hpp"

namespace delayctl::testing {

Matrix DrawSeq::system_matrix(Index n, double target_radius) {
    Matrix A = matrix(n, n);
    double radius = spectral_radius(A);
    if (radius < 1e-6) {
        A += Matrix::Identity(n, n);
        radius = spectral_radius(A);
    }
    A *= target_radius / radius;
    // Keep A comfortably invertible for the reduction machinery.
    Eigen::JacobiSVD<Matrix> svd(A);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-3 * sv(0)) {
        A += 0.1 * target_radius * Matrix::Identity(n, n);
        A *= target_radius / spectral_radius(A);
    }
    return A;
}

MultiDelaySystem random_system(DrawSeq& draw, Index max_n, Index max_m, int max_D) {
    MultiDelaySystem sys;
    sys.n = draw.uniform_int(1, static_cast<int>(max_n));
    sys.m = draw.uniform_int(1, static_cast<int>(max_m));
    sys.D = draw.uniform_int(0, max_D);
    sys.A = draw.system_matrix(sys.n, draw.uniform(0.4, 1.5));
    for (int tau = 0; tau <= sys.D; ++tau) {
        sys.B.push_back(draw.matrix(sys.n, sys.m, 0.7));
        sys.C.push_back(draw.matrix(sys.n, sys.m, 0.4));
        sys.sigma2.push_back(draw.uniform(0.0, 0.6));
    }
    return sys;
}

MultiDelaySystem example1_system() {
    MultiDelaySystem sys;
    sys.n = 3;
    sys.m = 2;
    sys.D = 2;
    sys.A = Matrix{{1, 2, 3}, {0, 2, 2}, {0, 0, 1}};
    sys.B = {Matrix{{2, 3}, {1, 1}, {1, 4}}, Matrix{{2, 4}, {2, 5}, {2, 2}},
             Matrix{{3, 4}, {1, 3}, {3, 5}}};
    sys.C = {Matrix{{5, 5}, {40, -3}, {3, 2}}, Matrix{{2, 5}, {2, 0}, {4, 4}},
             Matrix{{0, 3}, {2, 0}, {1, 2}}};
    sys.sigma2 = {1.0, 1.0, 1.0};
    return sys;
}

Matrix example1_paper_gain() {
    return Matrix{{-0.0001, -0.0028, -0.0105}, {0.0004, 0.0132, 0.0571}};
}

RestrictedSystem example2_system() {
    RestrictedSystem sys;
    sys.A = Matrix{{1.1, 0}, {0, 1.2}};
    sys.C0 = Matrix{{1, -0.5}, {0, 1.25}};
    sys.Bbar = Matrix{{2, 1}, {1, -1}};
    sys.Cbar = Matrix{{2, 0}, {0, 3}};
    sys.D = 2;
    sys.sigma0_2 = 1.0;
    sys.sigmaD_2 = 1.0;
    return sys;
}

Matrix example2_paper_Z() {
    return Matrix{{82.7362, -257.7524}, {-257.7524, 859.1263}};
}

}  // namespace delayctl::testing
