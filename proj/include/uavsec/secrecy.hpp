#pragma once

// Secrecy-rate mathematics. Rates are in bits/s/Hz (log base 2).
//
// Two routes compute the same quantities: a direct complex-arithmetic route
// (user_rate, eve_rate, secrecy_report) used for evaluation, and a real-domain
// route on the autodiff tape (secrecy_loss_real) used for training. The real
// route splits every inner product h^H w into the 2-vector
//   gamma = [ Re h . Re w + Im h . Im w ,  Re h . Im w - Im h . Re w ],
// whose squared norm equals |h^H w|^2.

#include "uavsec/autodiff.hpp"
#include "uavsec/channel.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace uavsec::secrecy {

using channel::ChannelSet;
using channel::CVector;

struct Beamformer {
    std::vector<CVector> vectors;  // w_k

    std::size_t size() const { return vectors.size(); }
    double total_power() const;
    Beamformer permuted(const std::vector<std::size_t>& perm) const;
};

struct RateReport {
    std::vector<double> user_rates;
    std::vector<double> eve_rates;
    std::vector<double> secrecy_rates;
    double sum = 0.0;
};

// log2(1 + |h^H w_k|^2 / (sum_{l != k} |h^H w_l|^2 + noise))
double link_rate(const CVector& h, std::size_t k, const Beamformer& w, double noise);
double user_rate(std::size_t k, const ChannelSet& channels, const Beamformer& w, double noise);
double eve_rate(std::size_t k, const ChannelSet& channels, const Beamformer& w, double noise);
RateReport secrecy_report(const ChannelSet& channels, const Beamformer& w, double noise);

std::array<double, 2> gamma_recast(const CVector& h, const CVector& w);

// w_k = sqrt(pmax) e_k / sqrt(sum_l ||e_l||^2). Throws DegenerateInputError
// when every embedding is zero.
Beamformer normalize_power(const std::vector<CVector>& embeddings, double pmax);

// ---- real-domain batch route --------------------------------------------------

// A batch of B channel sets with K users and N antennas, laid out as
// B*K rows (sample-major) of [Re h, Im h].
struct ChannelBatch {
    std::size_t batch = 0;
    std::size_t users = 0;
    std::size_t antennas = 0;
    ad::Matrix user_rows;
    ad::Matrix eve_rows;
};

ChannelBatch make_channel_batch(const std::vector<ChannelSet>& sets);

// Embedding rows [Re e, Im e] (B*K x 2N) -> normalized beamformer rows.
ad::Var normalize_power_real(ad::Var embeddings, std::size_t users, double pmax);

// Per-user secrecy rates (B*K x 1) of normalized beamformer rows.
ad::Var secrecy_rates_real(ad::Tape& tape, const ChannelBatch& channels, ad::Var beam_rows, double noise);

// -(1/B) sum_b sum_k R_k^sec of the normalized embeddings, as a tape scalar.
ad::Var secrecy_loss_real(ad::Tape& tape, const ChannelBatch& channels, ad::Var embeddings, double noise, double pmax);

// Complex beamformer of sample b from B*K x 2N rows.
Beamformer beamformer_from_rows(const ad::Tensor& rows, std::size_t sample, std::size_t users);
// Complex vector -> 1 x 2N row [Re, Im].
ad::Matrix to_real_row(const CVector& v);

}  // namespace uavsec::secrecy
