#include <algorithm>
#include <cmath>
#include <limits>

#include "linalg.hpp"
#include "textrisk/error.hpp"
#include "textrisk/network.hpp"

namespace textrisk {

using detail::axpy;
using detail::dot;

namespace {

bool live(std::span<const std::uint8_t> mask, std::size_t t) { return mask.empty() || mask[t] != 0; }

} // namespace

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

ConvResult conv_forward(std::span<const double> B, std::span<const double> W, const ConvShape& s) {
    require(s.gamma >= 1 && s.gamma < s.k && s.tau >= 1 && s.pooled_length() >= 1, ErrorKind::config,
            "convolution shape requires 1 <= gamma < k and tau <= k - gamma + 1");
    const auto k = static_cast<std::size_t>(s.k);
    const auto v = static_cast<std::size_t>(s.v);
    const auto gv = static_cast<std::size_t>(s.gamma) * v;
    require(B.size() == k * v, ErrorKind::data, "block matrix has wrong shape for conv_forward");
    require(W.size() == static_cast<std::size_t>(s.m) * gv, ErrorKind::data, "filter tensor has wrong shape");
    const auto L = static_cast<std::size_t>(s.conv_length());
    const auto P = static_cast<std::size_t>(s.pooled_length());
    const auto tau = static_cast<std::size_t>(s.tau);

    ConvResult r;
    r.x.resize(static_cast<std::size_t>(s.m) * L);
    r.z.resize(static_cast<std::size_t>(s.m) * P);
    r.argmax.resize(r.z.size());
    for (std::size_t p = 0; p < static_cast<std::size_t>(s.m); ++p) {
        const double* w = W.data() + p * gv;
        double* x = r.x.data() + p * L;
        for (std::size_t i = 0; i < L; ++i) x[i] = dot(w, B.data() + i * v, gv);
        for (std::size_t i = 0; i < P; ++i) {
            std::size_t best = i;
            for (std::size_t j = i + 1; j < i + tau; ++j) {
                if (x[j] > x[best]) best = j;
            }
            r.z[p * P + i] = x[best];
            r.argmax[p * P + i] = static_cast<int>(best);
        }
    }
    return r;
}

void conv_backward(std::span<const double> B, std::span<const double> W, const ConvShape& s, const ConvResult& fwd,
                   std::span<const double> dz, std::span<double> dW, std::span<double> dB) {
    const auto v = static_cast<std::size_t>(s.v);
    const auto gv = static_cast<std::size_t>(s.gamma) * v;
    const auto P = static_cast<std::size_t>(s.pooled_length());
    const auto L = static_cast<std::size_t>(s.conv_length());
    std::vector<double> dx(L);
    for (std::size_t p = 0; p < static_cast<std::size_t>(s.m); ++p) {
        std::fill(dx.begin(), dx.end(), 0.0);
        for (std::size_t i = 0; i < P; ++i) dx[static_cast<std::size_t>(fwd.argmax[p * P + i])] += dz[p * P + i];
        const double* w = W.data() + p * gv;
        double* gw = dW.data() + p * gv;
        for (std::size_t i = 0; i < L; ++i) {
            if (dx[i] == 0.0) continue;
            axpy(dx[i], B.data() + i * v, gw, gv);
            if (!dB.empty()) axpy(dx[i], w, dB.data() + i * v, gv);
        }
    }
}

LstmResult lstm_forward(std::span<const double> z_seq, std::span<const std::uint8_t> mask, std::span<const double> W,
                        std::span<const double> b, const LstmShape& s) {
    const auto d = static_cast<std::size_t>(s.d);
    const auto n_in = static_cast<std::size_t>(s.input);
    const std::size_t row = d + n_in;
    require(n_in > 0 && z_seq.size() % n_in == 0, ErrorKind::data, "LSTM input length is not a multiple of |z|");
    require(W.size() == 4 * d * row && b.size() == 4 * d, ErrorKind::data, "LSTM weights have wrong shape");
    const std::size_t T = z_seq.size() / n_in;
    require(mask.empty() || mask.size() == T, ErrorKind::data, "LSTM mask length differs from sequence length");

    LstmResult r;
    r.steps = static_cast<int>(T);
    for (auto* vec : {&r.h, &r.c, &r.f, &r.i, &r.u, &r.o, &r.tanh_c}) vec->assign(T * d, 0.0);
    std::vector<double> zero(d, 0.0);
    std::vector<double> a(4 * d);
    for (std::size_t t = 0; t < T; ++t) {
        const double* h_prev = t == 0 ? zero.data() : &r.h[(t - 1) * d];
        const double* c_prev = t == 0 ? zero.data() : &r.c[(t - 1) * d];
        if (!live(mask, t)) {
            std::copy(h_prev, h_prev + d, &r.h[t * d]);
            std::copy(c_prev, c_prev + d, &r.c[t * d]);
            for (std::size_t j = 0; j < d; ++j) r.tanh_c[t * d + j] = std::tanh(c_prev[j]);
            continue;
        }
        const double* z = &z_seq[t * n_in];
        for (std::size_t q = 0; q < 4 * d; ++q) {
            const double* w = &W[q * row];
            a[q] = b[q] + dot(w, h_prev, d) + dot(w + d, z, n_in);
        }
        for (std::size_t j = 0; j < d; ++j) {
            const double f = sigmoid(a[j]);
            const double in = sigmoid(a[d + j]);
            const double u = std::tanh(a[2 * d + j]);
            const double o = sigmoid(a[3 * d + j]);
            const double c = f * c_prev[j] + in * u;
            const double tc = std::tanh(c);
            r.f[t * d + j] = f;
            r.i[t * d + j] = in;
            r.u[t * d + j] = u;
            r.o[t * d + j] = o;
            r.c[t * d + j] = c;
            r.tanh_c[t * d + j] = tc;
            r.h[t * d + j] = o * tc;
        }
    }
    return r;
}

void lstm_backward(std::span<const double> z_seq, std::span<const std::uint8_t> mask, std::span<const double> W,
                   const LstmShape& s, const LstmResult& fwd, std::span<const double> dh, std::span<double> dW,
                   std::span<double> db, std::span<double> dz) {
    const auto d = static_cast<std::size_t>(s.d);
    const auto n_in = static_cast<std::size_t>(s.input);
    const std::size_t row = d + n_in;
    const auto T = static_cast<std::size_t>(fwd.steps);
    std::vector<double> dh_carry(d, 0.0), dc_carry(d, 0.0), zero(d, 0.0), da(4 * d), dhz(row);
    for (std::size_t t = T; t-- > 0;) {
        if (!live(mask, t)) {
            // h_t and c_t are copies of the previous state.
            for (std::size_t j = 0; j < d; ++j) dh_carry[j] += dh[t * d + j];
            continue;
        }
        const double* h_prev = t == 0 ? zero.data() : &fwd.h[(t - 1) * d];
        const double* c_prev = t == 0 ? zero.data() : &fwd.c[(t - 1) * d];
        for (std::size_t j = 0; j < d; ++j) {
            const std::size_t at = t * d + j;
            const double g = dh[at] + dh_carry[j];
            const double f = fwd.f[at], in = fwd.i[at], u = fwd.u[at], o = fwd.o[at], tc = fwd.tanh_c[at];
            const double dc = dc_carry[j] + g * o * (1.0 - tc * tc);
            da[j] = dc * c_prev[j] * f * (1.0 - f);
            da[d + j] = dc * u * in * (1.0 - in);
            da[2 * d + j] = dc * in * (1.0 - u * u);
            da[3 * d + j] = g * tc * o * (1.0 - o);
            dc_carry[j] = dc * f;
        }
        const double* z = &z_seq[t * n_in];
        std::fill(dhz.begin(), dhz.end(), 0.0);
        for (std::size_t q = 0; q < 4 * d; ++q) {
            if (da[q] == 0.0) continue;
            double* gw = &dW[q * row];
            axpy(da[q], h_prev, gw, d);
            axpy(da[q], z, gw + d, n_in);
            db[q] += da[q];
            axpy(da[q], &W[q * row], dhz.data(), row);
        }
        std::copy(dhz.begin(), dhz.begin() + static_cast<std::ptrdiff_t>(d), dh_carry.begin());
        if (!dz.empty()) {
            for (std::size_t j = 0; j < n_in; ++j) dz[t * n_in + j] += dhz[d + j];
        }
    }
}

AttentionResult attention_forward(std::span<const double> h, std::span<const std::uint8_t> mask,
                                  std::span<const double> w, double b, int d_int) {
    const auto d = static_cast<std::size_t>(d_int);
    require(d > 0 && h.size() % d == 0 && w.size() == d, ErrorKind::data, "attention input has wrong shape");
    const std::size_t T = h.size() / d;
    require(mask.empty() || mask.size() == T, ErrorKind::data, "attention mask length differs from sequence length");
    AttentionResult r;
    r.scores.assign(T, 0.0);
    r.alpha.assign(T, 0.0);
    r.h_final.assign(d, 0.0);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < T; ++t) {
        if (!live(mask, t)) continue;
        r.scores[t] = dot(w.data(), &h[t * d], d) + b;
        top = std::max(top, r.scores[t]);
    }
    require(std::isfinite(top), top == -std::numeric_limits<double>::infinity() ? ErrorKind::data : ErrorKind::numeric,
            top == -std::numeric_limits<double>::infinity() ? "attention over a fully masked sequence"
                                                            : "non-finite attention score");
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (!live(mask, t)) continue;
        r.alpha[t] = std::exp(r.scores[t] - top);
        total += r.alpha[t];
    }
    for (std::size_t t = 0; t < T; ++t) {
        r.alpha[t] /= total;
        if (r.alpha[t] != 0.0) axpy(r.alpha[t], &h[t * d], r.h_final.data(), d);
    }
    return r;
}

void attention_backward(std::span<const double> h, std::span<const std::uint8_t> mask, std::span<const double> w,
                        int d_int, const AttentionResult& fwd, std::span<const double> dh_final, std::span<double> dh,
                        std::span<double> dw, double& db) {
    const auto d = static_cast<std::size_t>(d_int);
    const std::size_t T = fwd.alpha.size();
    std::vector<double> dalpha(T, 0.0);
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (!live(mask, t)) continue;
        dalpha[t] = dot(dh_final.data(), &h[t * d], d);
        mean += fwd.alpha[t] * dalpha[t];
    }
    for (std::size_t t = 0; t < T; ++t) {
        if (!live(mask, t)) continue;
        const double ds = fwd.alpha[t] * (dalpha[t] - mean);
        axpy(fwd.alpha[t], dh_final.data(), &dh[t * d], d);
        axpy(ds, w.data(), &dh[t * d], d);
        axpy(ds, &h[t * d], dw.data(), d);
        db += ds;
    }
}

HeadResult head_forward(std::span<const double> x, const HeadWeights& w, const HeadShape& s) {
    const auto n = static_cast<std::size_t>(s.input);
    const auto h1 = static_cast<std::size_t>(s.hidden1);
    const auto h2 = static_cast<std::size_t>(s.hidden2);
    require(x.size() == n, ErrorKind::data,
            "dense head expects input of size " + std::to_string(n) + ", got " + std::to_string(x.size()));
    require(w.W1.size() == h1 * n && w.b1.size() == h1 && w.W2.size() == h2 * h1 && w.b2.size() == h2 &&
                w.W3.size() == h2 && w.b3.size() == 1,
            ErrorKind::data, "dense head weights have wrong shape");
    HeadResult r;
    r.l1.resize(h1);
    r.l2.resize(h2);
    for (std::size_t q = 0; q < h1; ++q) r.l1[q] = std::max(0.0, w.b1[q] + dot(&w.W1[q * n], x.data(), n));
    for (std::size_t q = 0; q < h2; ++q) r.l2[q] = std::max(0.0, w.b2[q] + dot(&w.W2[q * h1], r.l1.data(), h1));
    r.logit = w.b3[0] + dot(w.W3.data(), r.l2.data(), h2);
    r.pd = sigmoid(r.logit);
    return r;
}

void head_backward(std::span<const double> x, const HeadWeights& w, const HeadShape& s, const HeadResult& fwd,
                   double dlogit, const HeadGrads& g, std::span<double> dx) {
    const auto n = static_cast<std::size_t>(s.input);
    const auto h1 = static_cast<std::size_t>(s.hidden1);
    const auto h2 = static_cast<std::size_t>(s.hidden2);
    g.b3[0] += dlogit;
    axpy(dlogit, fwd.l2.data(), g.W3.data(), h2);
    std::vector<double> d2(h2), d1(h1, 0.0);
    for (std::size_t q = 0; q < h2; ++q) d2[q] = fwd.l2[q] > 0.0 ? dlogit * w.W3[q] : 0.0;
    for (std::size_t q = 0; q < h2; ++q) {
        if (d2[q] == 0.0) continue;
        g.b2[q] += d2[q];
        axpy(d2[q], fwd.l1.data(), &g.W2[q * h1], h1);
        axpy(d2[q], &w.W2[q * h1], d1.data(), h1);
    }
    for (std::size_t q = 0; q < h1; ++q) {
        if (fwd.l1[q] <= 0.0 || d1[q] == 0.0) continue;
        g.b1[q] += d1[q];
        axpy(d1[q], x.data(), &g.W1[q * n], n);
        if (!dx.empty()) axpy(d1[q], &w.W1[q * n], dx.data(), n);
    }
}

double bce_with_logit(double logit, double y) {
    // softplus(l) - y l, stable for either sign of l.
    return std::max(logit, 0.0) - y * logit + std::log1p(std::exp(-std::abs(logit)));
}

double bce_with_logits(std::span<const double> logits, std::span<const double> y) {
    require(logits.size() == y.size() && !y.empty(), ErrorKind::data, "bce needs equal, non-empty inputs");
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += bce_with_logit(logits[i], y[i]);
    return total / static_cast<double>(y.size());
}

double bce_loss(std::span<const double> pd, std::span<const double> y) {
    require(pd.size() == y.size() && !y.empty(), ErrorKind::data, "bce needs equal, non-empty inputs");
    constexpr double eps = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::clamp(pd[i], eps, 1.0 - eps);
        total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    return total / static_cast<double>(y.size());
}

} // namespace textrisk
