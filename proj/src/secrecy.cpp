#include "uavsec/secrecy.hpp"

#include "uavsec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace uavsec::secrecy {

using ad::Matrix;
using ad::Tensor;
using ad::Var;
using Eigen::Index;

double Beamformer::total_power() const {
    double p = 0.0;
    for (const auto& w : vectors) p += w.squaredNorm();
    return p;
}

Beamformer Beamformer::permuted(const std::vector<std::size_t>& perm) const {
    Beamformer out;
    for (std::size_t i : perm) out.vectors.push_back(vectors.at(i));
    return out;
}

double link_rate(const CVector& h, std::size_t k, const Beamformer& w, double noise) {
    if (!(noise > 0.0)) throw DomainError("noise power must be positive");
    if (k >= w.size()) throw DimensionError("user index out of range");
    double signal = 0.0;
    double interference = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) {
        if (w.vectors[l].size() != h.size()) throw DimensionError("beamformer length does not match channel");
        const double p = std::norm(h.dot(w.vectors[l]));  // Eigen dot conjugates the left operand
        if (l == k)
            signal = p;
        else
            interference += p;
    }
    return std::log2(1.0 + signal / (interference + noise));
}

double user_rate(std::size_t k, const ChannelSet& channels, const Beamformer& w, double noise) {
    return link_rate(channels.users.at(k), k, w, noise);
}

double eve_rate(std::size_t k, const ChannelSet& channels, const Beamformer& w, double noise) {
    return link_rate(channels.eves.at(k), k, w, noise);
}

RateReport secrecy_report(const ChannelSet& channels, const Beamformer& w, double noise) {
    if (w.size() != channels.size()) throw DimensionError("beamformer count does not match user count");
    RateReport r;
    for (std::size_t k = 0; k < channels.size(); ++k) {
        const double ru = user_rate(k, channels, w, noise);
        const double re = eve_rate(k, channels, w, noise);
        r.user_rates.push_back(ru);
        r.eve_rates.push_back(re);
        r.secrecy_rates.push_back(std::max(ru - re, 0.0));
        r.sum += r.secrecy_rates.back();
    }
    return r;
}

std::array<double, 2> gamma_recast(const CVector& h, const CVector& w) {
    if (h.size() != w.size()) throw DimensionError("gamma_recast: length mismatch");
    const Eigen::VectorXd hr = h.real(), hi = h.imag(), wr = w.real(), wi = w.imag();
    return {hr.dot(wr) + hi.dot(wi), hr.dot(wi) - hi.dot(wr)};
}

Beamformer normalize_power(const std::vector<CVector>& embeddings, double pmax) {
    if (!(pmax > 0.0)) throw DomainError("power budget must be positive");
    double total = 0.0;
    for (const auto& e : embeddings) total += e.squaredNorm();
    if (!(total > 0.0)) throw DegenerateInputError("cannot normalize all-zero embeddings");
    const double f = std::sqrt(pmax / total);
    Beamformer b;
    for (const auto& e : embeddings) b.vectors.push_back(e * f);
    return b;
}

Matrix to_real_row(const CVector& v) {
    const Index n = v.size();
    Matrix row(1, 2 * n);
    row.leftCols(n) = v.real().transpose();
    row.rightCols(n) = v.imag().transpose();
    return row;
}

ChannelBatch make_channel_batch(const std::vector<ChannelSet>& sets) {
    if (sets.empty()) throw DimensionError("empty channel batch");
    ChannelBatch b;
    b.batch = sets.size();
    b.users = sets.front().size();
    b.antennas = sets.front().antennas();
    const auto rows = static_cast<Index>(b.batch * b.users);
    const auto cols = static_cast<Index>(2 * b.antennas);
    b.user_rows.resize(rows, cols);
    b.eve_rows.resize(rows, cols);
    Index r = 0;
    for (const auto& s : sets) {
        if (s.size() != b.users || s.antennas() != b.antennas) throw DimensionError("channel sets in a batch must share K and N");
        for (std::size_t k = 0; k < s.size(); ++k, ++r) {
            b.user_rows.row(r) = to_real_row(s.users[k]);
            b.eve_rows.row(r) = to_real_row(s.eves[k]);
        }
    }
    return b;
}

Var normalize_power_real(Var embeddings, std::size_t users, double pmax) {
    if (!(pmax > 0.0)) throw DomainError("power budget must be positive");
    const std::size_t rows = embeddings.rows();
    if (users == 0 || rows % users != 0) throw DimensionError("embedding rows not divisible by user count");
    Var per_sample = ad::segment_sum_rows(ad::sum_cols(ad::square(embeddings)), users);  // B x 1
    if ((per_sample.value().matrix().array() <= 0.0).any()) {
        throw DegenerateInputError("cannot normalize all-zero embeddings");
    }
    // sqrt(pmax / s) = exp(0.5 log pmax - 0.5 log s)
    Var inv = ad::exp(ad::add_scalar(ad::scale(ad::log(per_sample), -0.5), 0.5 * std::log(pmax)));
    std::vector<std::size_t> owner(rows);
    for (std::size_t r = 0; r < rows; ++r) owner[r] = r / users;
    return ad::mul(embeddings, ad::gather_rows(inv, owner));
}

namespace {

// |h_k^H w_l|^2 for every (sample, k, l), laid out as B*K*K rows.
Var pair_powers(ad::Tape& tape, const Matrix& h_rows, Var beam_rows, std::size_t users, std::size_t antennas) {
    const std::size_t bk = static_cast<std::size_t>(h_rows.rows());
    const std::size_t batch = bk / users;
    const auto n = static_cast<Index>(antennas);
    std::vector<std::size_t> w_index;
    w_index.reserve(bk * users);
    Matrix h_rep(static_cast<Index>(bk * users), 2 * n);
    Matrix h_rot(static_cast<Index>(bk * users), 2 * n);
    Index r = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t k = 0; k < users; ++k) {
            const auto hk = h_rows.row(static_cast<Index>(b * users + k));
            for (std::size_t l = 0; l < users; ++l, ++r) {
                h_rep.row(r) = hk;
                h_rot.row(r).leftCols(n) = -hk.rightCols(n);
                h_rot.row(r).rightCols(n) = hk.leftCols(n);
                w_index.push_back(b * users + l);
            }
        }
    }
    Var w_rep = ad::gather_rows(beam_rows, w_index);
    Var g_re = ad::sum_cols(ad::mul(tape.constant(Tensor(std::move(h_rep))), w_rep));
    Var g_im = ad::sum_cols(ad::mul(tape.constant(Tensor(std::move(h_rot))), w_rep));
    Var gamma = ad::concat({g_re, g_im}, 1);
    return ad::sum_cols(ad::square(gamma));
}

// Rate of every link in bits/s/Hz from the pair powers.
Var link_rates(ad::Tape& tape, Var powers, std::size_t batch, std::size_t users, double noise) {
    Matrix diag_mask = Matrix::Zero(static_cast<Index>(batch * users * users), 1);
    std::vector<std::size_t> diag;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t k = 0; k < users; ++k) {
            const std::size_t row = (b * users + k) * users + k;
            diag.push_back(row);
            diag_mask(static_cast<Index>(row), 0) = 1.0;
        }
    Var signal = ad::gather_rows(powers, diag);
    Var off = tape.constant(Tensor(Matrix(Matrix::Ones(diag_mask.rows(), 1) - diag_mask)));
    Var interference = ad::segment_sum_rows(ad::mul(powers, off), users);
    // log2(1 + S/(I+n)) = log2(S + I + n) - log2(I + n)
    Var i_plus_n = ad::add_scalar(interference, noise);
    Var num = ad::add(signal, i_plus_n);
    return ad::scale(ad::sub(ad::log(num), ad::log(i_plus_n)), 1.0 / std::numbers::ln2);
}

}  // namespace

Var secrecy_rates_real(ad::Tape& tape, const ChannelBatch& channels, Var beam_rows, double noise) {
    if (!(noise > 0.0)) throw DomainError("noise power must be positive");
    const std::size_t bk = channels.batch * channels.users;
    if (beam_rows.rows() != bk || beam_rows.cols() != 2 * channels.antennas) {
        throw DimensionError("beamformer rows " + beam_rows.value().shape_string() + " do not match channel batch");
    }
    Var user_p = pair_powers(tape, channels.user_rows, beam_rows, channels.users, channels.antennas);
    Var eve_p = pair_powers(tape, channels.eve_rows, beam_rows, channels.users, channels.antennas);
    Var ru = link_rates(tape, user_p, channels.batch, channels.users, noise);
    Var re = link_rates(tape, eve_p, channels.batch, channels.users, noise);
    return ad::clamp_min(ad::sub(ru, re), 0.0);
}

Var secrecy_loss_real(ad::Tape& tape, const ChannelBatch& channels, Var embeddings, double noise, double pmax) {
    Var w = normalize_power_real(embeddings, channels.users, pmax);
    Var sec = secrecy_rates_real(tape, channels, w, noise);
    return ad::scale(ad::sum(sec), -1.0 / static_cast<double>(channels.batch));
}

Beamformer beamformer_from_rows(const ad::Tensor& rows, std::size_t sample, std::size_t users) {
    const Index n = static_cast<Index>(rows.cols() / 2);
    Beamformer b;
    for (std::size_t k = 0; k < users; ++k) {
        const auto r = static_cast<Index>(sample * users + k);
        if (static_cast<std::size_t>(r) >= rows.rows()) throw DimensionError("sample index out of range");
        CVector w(n);
        for (Index i = 0; i < n; ++i) w(i) = {rows.matrix()(r, i), rows.matrix()(r, n + i)};
        b.vectors.push_back(std::move(w));
    }
    return b;
}

}  // namespace uavsec::secrecy
