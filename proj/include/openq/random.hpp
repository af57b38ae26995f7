#pragma once
// Seeded random streams. mt19937_64 and seed_seq are fully specified by the
// standard, but std distributions are not, so the conversions live here.

#include <cmath>
#include <cstdint>
#include <random>

#include "openq/numkit.hpp"

namespace openq {

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed, 0); }
    Rng(std::uint64_t base_seed, std::uint64_t stream) { reseed(base_seed, stream); }

    // Independent stream k of a base seed; used for per-trajectory reproducibility.
    static Rng stream(std::uint64_t base_seed, std::uint64_t k) { return Rng(base_seed, k); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    // Uniform on (0, 1).
    double uniform_open() {
        double u;
        do u = uniform();
        while (u == 0.0);
        return u;
    }
    // Standard normal via Box-Muller, caching the second variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2 * pi * u2);
        has_spare_ = true;
        return r * std::cos(2 * pi * u2);
    }
    std::uint64_t next_u64() { return eng_(); }

private:
    void reseed(std::uint64_t base, std::uint64_t k) {
        std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                          static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32), 0x6f70656eu};
        eng_.seed(seq);
        has_spare_ = false;
    }
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline ComplexMatrix random_ginibre(int r, int c, Rng& rng) {
    ComplexMatrix g(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) g(i, j) = cplx(rng.normal(), rng.normal()) / std::sqrt(2.0);
    return g;
}

// Haar unitary: QR of a Ginibre matrix with the phases of R's diagonal removed.
inline ComplexMatrix random_unitary(int d, Rng& rng) {
    Eigen::MatrixXcd g = random_ginibre(d, d, rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ();
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j) {
        const cplx rjj = r(j, j);
        const double a = std::abs(rjj);
        q.col(j) *= (a > 0 ? rjj / a : cplx(1.0));
    }
    return q;
}

inline ComplexVector random_pure_state(int d, Rng& rng) {
    ComplexVector v(d);
    for (int i = 0; i < d; ++i) v(i) = cplx(rng.normal(), rng.normal());
    return v / v.norm();
}

// Random density matrix G G^dagger / Tr, G Ginibre d x rank (rank = d gives Hilbert-Schmidt measure).
inline ComplexMatrix random_density(int d, Rng& rng, int rank = -1) {
    if (rank <= 0) rank = d;
    const ComplexMatrix g = random_ginibre(d, rank, rng);
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return hermitian_part(rho);
}

inline ComplexMatrix random_hermitian(int d, Rng& rng, double scale = 1.0) {
    const ComplexMatrix g = random_ginibre(d, d, rng);
    return scale * hermitian_part(g);
}

}  // namespace openq
