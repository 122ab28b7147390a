// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#include <dynmap/maps/mlp_map.hpp>

#include <dynmap/diff/gemm.hpp>
#include <dynmap/diff/ops.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dynmap::maps {

CellIndex bin_lookup(Plane plane, int resolution, const Vec3& p) {
    const auto uv = enc::project(plane, clamp_unit(p));
    auto bin = [resolution](double x) {
        return std::min(static_cast<int>(std::floor(x * resolution)), resolution - 1);
    };
    return {bin(uv[0]), bin(uv[1])};
}

namespace {

double softplus_d(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::int64_t flat_cell(const MlpMap& map, const Vec3& p) {
    const auto c = bin_lookup(map, p);
    return std::int64_t{c.i} * map.resolution + c.j;
}

std::vector<double> cell_params(const MlpMap& map, std::int64_t flat) {
    std::vector<double> w(static_cast<std::size_t>(map.params));
    diff::dispatch(map.cells.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* row = map.cells.data<T>().data() + flat * map.params;
        std::copy(row, row + map.params, w.begin());
    });
    return w;
}

void check_maps(const std::vector<MlpMap>& maps, int params, const char* what) {
    if (maps.empty()) {
        throw std::invalid_argument(std::string(what) + ": map set has no maps");
    }
    for (const auto& m : maps) {
        if (m.params != params || !m.cells.defined() || m.cells.ndim() != 2 ||
            m.cells.dim(0) != std::int64_t{m.resolution} * m.resolution || m.cells.dim(1) != params) {
            throw std::invalid_argument(std::string(what) + ": malformed MLP map on plane " +
                                        std::string(enc::plane_name(m.plane)));
        }
    }
}

// Counting sort of point indices by flat cell.
struct Buckets {
    std::vector<std::int64_t> offsets; // R*R + 1
    std::vector<std::int64_t> order;
};

Buckets bucket_points(const MlpMap& map, std::span<const Vec3> points) {
    const std::int64_t cells = std::int64_t{map.resolution} * map.resolution;
    Buckets b;
    b.offsets.assign(static_cast<std::size_t>(cells + 1), 0);
    std::vector<std::int64_t> key(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        key[i] = flat_cell(map, points[i]);
        ++b.offsets[static_cast<std::size_t>(key[i] + 1)];
    }
    for (std::int64_t c = 0; c < cells; ++c) {
        b.offsets[static_cast<std::size_t>(c + 1)] += b.offsets[static_cast<std::size_t>(c)];
    }
    std::vector<std::int64_t> cursor(b.offsets.begin(), b.offsets.end() - 1);
    b.order.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        b.order[static_cast<std::size_t>(cursor[static_cast<std::size_t>(key[i])]++)] = static_cast<std::int64_t>(i);
    }
    return b;
}

// Y[n x m] = X[n x k] * W[m x k]^T for one cell. Rows go through the kernel
// in zero-padded blocks of kLanes, one lane per row, so each output row
// depends only on its own input row and not on its position in the group.
constexpr std::int64_t kLanes = 16;

template <class T>
void rows_nt(std::int64_t n, std::int64_t m, std::int64_t k, const T* x, std::int64_t ldx, const T* w, T* y,
             std::int64_t ldy) {
    thread_local std::vector<T> xt, acc;
    xt.resize(static_cast<std::size_t>(k * kLanes));
    acc.resize(static_cast<std::size_t>(m * kLanes));
    for (std::int64_t r0 = 0; r0 < n; r0 += kLanes) {
        const std::int64_t rows = std::min(kLanes, n - r0);
        std::fill(xt.begin(), xt.end(), T(0));
        for (std::int64_t b = 0; b < rows; ++b) {
            const T* xr = x + (r0 + b) * ldx;
            for (std::int64_t q = 0; q < k; ++q) {
                xt[static_cast<std::size_t>(q * kLanes + b)] = xr[q];
            }
        }
        using Lane = Eigen::Array<T, kLanes, 1>;
        std::int64_t o = 0;
        for (; o + 4 <= m; o += 4) {
            Lane l0 = Lane::Zero(), l1 = Lane::Zero(), l2 = Lane::Zero(), l3 = Lane::Zero();
            const T* w0 = w + o * k;
            for (std::int64_t q = 0; q < k; ++q) {
                const Lane xq = Eigen::Map<const Lane>(xt.data() + q * kLanes);
                l0 += w0[q] * xq;
                l1 += w0[k + q] * xq;
                l2 += w0[2 * k + q] * xq;
                l3 += w0[3 * k + q] * xq;
            }
            Eigen::Map<Lane>(acc.data() + o * kLanes) = l0;
            Eigen::Map<Lane>(acc.data() + (o + 1) * kLanes) = l1;
            Eigen::Map<Lane>(acc.data() + (o + 2) * kLanes) = l2;
            Eigen::Map<Lane>(acc.data() + (o + 3) * kLanes) = l3;
        }
        for (; o < m; ++o) {
            Lane lane = Lane::Zero();
            const T* wo = w + o * k;
            for (std::int64_t q = 0; q < k; ++q) {
                lane += wo[q] * Eigen::Map<const Lane>(xt.data() + q * kLanes);
            }
            Eigen::Map<Lane>(acc.data() + o * kLanes) = lane;
        }
        for (std::int64_t b = 0; b < rows; ++b) {
            T* yr = y + (r0 + b) * ldy;
            for (std::int64_t o = 0; o < m; ++o) {
                yr[o] = acc[static_cast<std::size_t>(o * kLanes + b)];
            }
        }
    }
}

// Fixed-order dot product; the result depends only on the two vectors.
template <class T>
T row_dot(const T* x, const T* w, std::int64_t k) {
    constexpr std::int64_t kAcc = 8;
    T acc[kAcc] = {};
    std::int64_t q = 0;
    for (; q + kAcc <= k; q += kAcc) {
        for (std::int64_t j = 0; j < kAcc; ++j) {
            acc[j] += x[q + j] * w[q + j];
        }
    }
    for (; q < k; ++q) {
        acc[0] += x[q] * w[q];
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <class T>
void gather(const T* src, std::int64_t width, std::span<const std::int64_t> rows, T* dst, std::int64_t dst_stride) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(src + rows[r] * width, width, dst + static_cast<std::int64_t>(r) * dst_stride);
    }
}

template <class T>
void scatter_add(const T* src, std::int64_t width, std::int64_t src_stride, std::span<const std::int64_t> rows,
                 T* dst) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const T* s = src + static_cast<std::int64_t>(r) * src_stride;
        T* d = dst + rows[r] * width;
        for (std::int64_t k = 0; k < width; ++k) {
            d[k] += s[k];
        }
    }
}

} // namespace

DensitySample eval_density(const MlpMapSet& set, std::span<const double> gamma_p, const Vec3& p) {
    const int nf = set.shape.feature_dim;
    if (gamma_p.size() != static_cast<std::size_t>(nf)) {
        throw std::invalid_argument("eval_density: feature width mismatch");
    }
    double raw = 0;
    for (const auto& map : set.density) {
        const auto w = cell_params(map, flat_cell(map, p));
        for (int k = 0; k < nf; ++k) {
            raw += w[static_cast<std::size_t>(k)] * gamma_p[static_cast<std::size_t>(k)];
        }
    }
    return {softplus_d(raw), raw};
}

std::array<double, 3> eval_color(const MlpMapSet& set, std::span<const double> gamma_p,
                                 std::span<const double> gamma_d, const Vec3& p) {
    const int nf = set.shape.feature_dim;
    const int nh = set.shape.hidden_dim;
    const int nz = nh + enc::kDirEncodedDim;
    if (gamma_p.size() != static_cast<std::size_t>(nf) || gamma_d.size() != enc::kDirEncodedDim) {
        throw std::invalid_argument("eval_color: input width mismatch");
    }
    std::array<double, 3> logits{};
    std::vector<double> z(static_cast<std::size_t>(nz));
    std::vector<double> h2(static_cast<std::size_t>(nh));
    for (const auto& map : set.color) {
        const auto w = cell_params(map, flat_cell(map, p));
        const double* w1 = w.data();
        const double* w2 = w1 + nh * nf;
        const double* w3 = w2 + nh * nz;
        for (int o = 0; o < nh; ++o) {
            double s = 0;
            for (int k = 0; k < nf; ++k) {
                s += w1[o * nf + k] * gamma_p[static_cast<std::size_t>(k)];
            }
            z[static_cast<std::size_t>(o)] = std::max(s, 0.0);
        }
        std::copy(gamma_d.begin(), gamma_d.end(), z.begin() + nh);
        for (int o = 0; o < nh; ++o) {
            double s = 0;
            for (int k = 0; k < nz; ++k) {
                s += w2[o * nz + k] * z[static_cast<std::size_t>(k)];
            }
            h2[static_cast<std::size_t>(o)] = std::max(s, 0.0);
        }
        for (int o = 0; o < 3; ++o) {
            double s = 0;
            for (int k = 0; k < nh; ++k) {
                s += w3[o * nh + k] * h2[static_cast<std::size_t>(k)];
            }
            logits[static_cast<std::size_t>(o)] += s;
        }
    }
    return {sigmoid_d(logits[0]), sigmoid_d(logits[1]), sigmoid_d(logits[2])};
}

std::vector<CellGroup> group_points(const MlpMap& map, std::span<const Vec3> points) {
    const Buckets b = bucket_points(map, points);
    std::vector<CellGroup> groups;
    for (std::size_t c = 0; c + 1 < b.offsets.size(); ++c) {
        if (b.offsets[c] == b.offsets[c + 1]) {
            continue;
        }
        CellGroup g;
        g.cell = {static_cast<int>(c) / map.resolution, static_cast<int>(c) % map.resolution};
        g.indices.assign(b.order.begin() + b.offsets[c], b.order.begin() + b.offsets[c + 1]);
        groups.push_back(std::move(g));
    }
    return groups;
}

// ---------------------------------------------------------------------------
// Grouped kernels

diff::Tensor density_logits(const MlpMapSet& set, std::span<const Vec3> points, const diff::Tensor& features) {
    const int nf = set.shape.feature_dim;
    check_maps(set.density, nf, "density_logits");
    const auto n = static_cast<std::int64_t>(points.size());
    if (features.ndim() != 2 || features.dim(0) != n || features.dim(1) != nf) {
        throw std::invalid_argument("density_logits: features must be [N x " + std::to_string(nf) + "]");
    }
    std::vector<Buckets> buckets;
    for (const auto& map : set.density) {
        buckets.push_back(bucket_points(map, points));
    }
    diff::Tensor out = diff::Tensor::zeros({n}, features.dtype());
    diff::dispatch(features.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* x = features.data<T>().data();
        T* o = out.data<T>().data();
        std::vector<T> xg, sg;
        for (std::size_t p = 0; p < set.density.size(); ++p) {
            const T* w = set.density[p].cells.template data<T>().data();
            const auto& b = buckets[p];
            for (std::size_t c = 0; c + 1 < b.offsets.size(); ++c) {
                const std::int64_t cnt = b.offsets[c + 1] - b.offsets[c];
                if (cnt == 0) {
                    continue;
                }
                std::span<const std::int64_t> rows(b.order.data() + b.offsets[c], static_cast<std::size_t>(cnt));
                const T* wc = w + static_cast<std::int64_t>(c) * nf;
                for (const std::int64_t r : rows) {
                    o[r] += row_dot(x + r * nf, wc, nf);
                }
            }
        }
    });

    std::vector<diff::Tensor> inputs{features};
    for (const auto& m : set.density) {
        inputs.push_back(m.cells);
    }
    diff::Tensor::record(
        out, inputs,
        [buckets = std::move(buckets), inputs, nf](const diff::Buffer& g, const diff::Buffer&,
                                                   std::span<diff::Buffer* const> gi) {
            diff::dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* gp = g.span<T>().data();
                const T* x = inputs[0].data<T>().data();
                T* dx = gi[0] ? gi[0]->span<T>().data() : nullptr;
                std::vector<T> xg, gg, dxg;
                for (std::size_t p = 0; p < buckets.size(); ++p) {
                    const T* w = inputs[p + 1].data<T>().data();
                    T* dw = gi[p + 1] ? gi[p + 1]->span<T>().data() : nullptr;
                    const auto& b = buckets[p];
                    for (std::size_t c = 0; c + 1 < b.offsets.size(); ++c) {
                        const std::int64_t cnt = b.offsets[c + 1] - b.offsets[c];
                        if (cnt == 0) {
                            continue;
                        }
                        std::span<const std::int64_t> rows(b.order.data() + b.offsets[c],
                                                           static_cast<std::size_t>(cnt));
                        gg.resize(static_cast<std::size_t>(cnt));
                        gather(gp, 1, rows, gg.data(), 1);
                        const T* wc = w + static_cast<std::int64_t>(c) * nf;
                        if (dw) {
                            xg.resize(static_cast<std::size_t>(cnt * nf));
                            gather(x, nf, rows, xg.data(), nf);
                            diff::gemm<T>(true, false, 1, nf, cnt, T(1), gg.data(), 1, xg.data(), nf, T(1),
                                          dw + static_cast<std::int64_t>(c) * nf, nf);
                        }
                        if (dx) {
                            dxg.resize(static_cast<std::size_t>(cnt * nf));
                            diff::gemm<T>(false, false, cnt, nf, 1, T(1), gg.data(), 1, wc, nf, T(0), dxg.data(), nf);
                            scatter_add(dxg.data(), nf, nf, rows, dx);
                        }
                    }
                }
            });
        },
        "density_logits");
    return out;
}

diff::Tensor color_logits(const MlpMapSet& set, std::span<const Vec3> points, const diff::Tensor& features,
                          const diff::Tensor& dir_features) {
    const int nf = set.shape.feature_dim;
    const int nh = set.shape.hidden_dim;
    const int nd = enc::kDirEncodedDim;
    const int nz = nh + nd;
    const int np = set.shape.color_params();
    check_maps(set.color, np, "color_logits");
    const auto n = static_cast<std::int64_t>(points.size());
    if (features.ndim() != 2 || features.dim(0) != n || features.dim(1) != nf) {
        throw std::invalid_argument("color_logits: features must be [N x " + std::to_string(nf) + "]");
    }
    if (dir_features.ndim() != 2 || dir_features.dim(0) != n || dir_features.dim(1) != nd) {
        throw std::invalid_argument("color_logits: direction features must be [N x 15]");
    }
    if (dir_features.dtype() != features.dtype()) {
        throw std::invalid_argument("color_logits: mixed precisions");
    }
    const std::size_t planes = set.color.size();
    std::vector<Buckets> buckets;
    for (const auto& map : set.color) {
        buckets.push_back(bucket_points(map, points));
    }

    // Post-ReLU activations per plane, stored in bucket order for backward.
    auto saved = std::make_shared<std::vector<diff::Buffer>>();
    diff::Tensor out = diff::Tensor::zeros({n, 3}, features.dtype());
    diff::dispatch(features.dtype(), [&](auto tag) {
        using T = decltype(tag);
        const T* x = features.data<T>().data();
        const T* d = dir_features.data<T>().data();
        T* o = out.data<T>().data();
        std::vector<T> xg, z, og;
        for (std::size_t p = 0; p < planes; ++p) {
            diff::Buffer h1s(features.dtype(), static_cast<std::size_t>(n * nh));
            diff::Buffer h2s(features.dtype(), static_cast<std::size_t>(n * nh));
            T* h1_all = h1s.span<T>().data();
            T* h2_all = h2s.span<T>().data();
            const T* wmap = set.color[p].cells.template data<T>().data();
            const auto& b = buckets[p];
            for (std::size_t c = 0; c + 1 < b.offsets.size(); ++c) {
                const std::int64_t start = b.offsets[c];
                const std::int64_t cnt = b.offsets[c + 1] - start;
                if (cnt == 0) {
                    continue;
                }
                std::span<const std::int64_t> rows(b.order.data() + start, static_cast<std::size_t>(cnt));
                const T* w1 = wmap + static_cast<std::int64_t>(c) * np;
                const T* w2 = w1 + nh * nf;
                const T* w3 = w2 + nh * nz;
                T* h1 = h1_all + start * nh;
                T* h2 = h2_all + start * nh;
                xg.resize(static_cast<std::size_t>(cnt * nf));
                z.resize(static_cast<std::size_t>(cnt * nz));
                og.resize(static_cast<std::size_t>(cnt * 3));
                gather(x, nf, rows, xg.data(), nf);
                rows_nt<T>(cnt, nh, nf, xg.data(), nf, w1, h1, nh);
                for (std::int64_t i = 0; i < cnt * nh; ++i) {
                    h1[i] = std::max(h1[i], T(0));
                }
                for (std::int64_t r = 0; r < cnt; ++r) {
                    std::copy_n(h1 + r * nh, nh, z.data() + r * nz);
                }
                gather(d, nd, rows, z.data() + nh, nz);
                rows_nt<T>(cnt, nh, nz, z.data(), nz, w2, h2, nh);
                for (std::int64_t i = 0; i < cnt * nh; ++i) {
                    h2[i] = std::max(h2[i], T(0));
                }
                rows_nt<T>(cnt, 3, nh, h2, nh, w3, og.data(), 3);
                scatter_add(og.data(), 3, 3, rows, o);
            }
            saved->push_back(std::move(h1s));
            saved->push_back(std::move(h2s));
        }
    });

    std::vector<diff::Tensor> inputs{features, dir_features};
    for (const auto& m : set.color) {
        inputs.push_back(m.cells);
    }
    diff::Tensor::record(
        out, inputs,
        [buckets = std::move(buckets), saved, inputs, nf, nh, nd, nz, np](
            const diff::Buffer& g, const diff::Buffer&, std::span<diff::Buffer* const> gi) {
            diff::dispatch(g.dtype(), [&](auto tag) {
                using T = decltype(tag);
                const T* gp = g.span<T>().data();
                const T* x = inputs[0].data<T>().data();
                const T* d = inputs[1].data<T>().data();
                T* dx = gi[0] ? gi[0]->span<T>().data() : nullptr;
                T* dd = gi[1] ? gi[1]->span<T>().data() : nullptr;
                std::vector<T> xg, z, go, dh2, dz, dxg;
                for (std::size_t p = 0; p < buckets.size(); ++p) {
                    const T* wmap = inputs[p + 2].data<T>().data();
                    T* dwmap = gi[p + 2] ? gi[p + 2]->span<T>().data() : nullptr;
                    const T* h1_all = (*saved)[2 * p].span<T>().data();
                    const T* h2_all = (*saved)[2 * p + 1].span<T>().data();
                    const auto& b = buckets[p];
                    for (std::size_t c = 0; c + 1 < b.offsets.size(); ++c) {
                        const std::int64_t start = b.offsets[c];
                        const std::int64_t cnt = b.offsets[c + 1] - start;
                        if (cnt == 0) {
                            continue;
                        }
                        std::span<const std::int64_t> rows(b.order.data() + start, static_cast<std::size_t>(cnt));
                        const T* w1 = wmap + static_cast<std::int64_t>(c) * np;
                        const T* w2 = w1 + nh * nf;
                        const T* w3 = w2 + nh * nz;
                        T* dw1 = dwmap ? dwmap + static_cast<std::int64_t>(c) * np : nullptr;
                        T* dw2 = dw1 ? dw1 + nh * nf : nullptr;
                        T* dw3 = dw2 ? dw2 + nh * nz : nullptr;
                        const T* h1 = h1_all + start * nh;
                        const T* h2 = h2_all + start * nh;

                        go.resize(static_cast<std::size_t>(cnt * 3));
                        gather(gp, 3, rows, go.data(), 3);
                        xg.resize(static_cast<std::size_t>(cnt * nf));
                        gather(x, nf, rows, xg.data(), nf);
                        z.resize(static_cast<std::size_t>(cnt * nz));
                        for (std::int64_t r = 0; r < cnt; ++r) {
                            std::copy_n(h1 + r * nh, nh, z.data() + r * nz);
                        }
                        gather(d, nd, rows, z.data() + nh, nz);

                        if (dw3) {
                            diff::gemm<T>(true, false, 3, nh, cnt, T(1), go.data(), 3, h2, nh, T(1), dw3, nh);
                        }
                        dh2.resize(static_cast<std::size_t>(cnt * nh));
                        diff::gemm<T>(false, false, cnt, nh, 3, T(1), go.data(), 3, w3, nh, T(0), dh2.data(), nh);
                        for (std::int64_t i = 0; i < cnt * nh; ++i) {
                            if (!(h2[i] > T(0))) {
                                dh2[static_cast<std::size_t>(i)] = T(0);
                            }
                        }
                        if (dw2) {
                            diff::gemm<T>(true, false, nh, nz, cnt, T(1), dh2.data(), nh, z.data(), nz, T(1), dw2,
                                          nz);
                        }
                        dz.resize(static_cast<std::size_t>(cnt * nz));
                        diff::gemm<T>(false, false, cnt, nz, nh, T(1), dh2.data(), nh, w2, nz, T(0), dz.data(), nz);
                        if (dd) {
                            scatter_add(dz.data() + nh, nd, nz, rows, dd);
                        }
                        for (std::int64_t r = 0; r < cnt; ++r) {
                            for (int k = 0; k < nh; ++k) {
                                if (!(h1[r * nh + k] > T(0))) {
                                    dz[static_cast<std::size_t>(r * nz + k)] = T(0);
                                }
                            }
                        }
                        if (dw1) {
                            diff::gemm<T>(true, false, nh, nf, cnt, T(1), dz.data(), nz, xg.data(), nf, T(1), dw1,
                                          nf);
                        }
                        if (dx) {
                            dxg.resize(static_cast<std::size_t>(cnt * nf));
                            diff::gemm<T>(false, false, cnt, nf, nh, T(1), dz.data(), nz, w1, nf, T(0), dxg.data(),
                                          nf);
                            scatter_add(dxg.data(), nf, nf, rows, dx);
                        }
                    }
                }
            });
        },
        "color_logits");
    return out;
}

diff::Tensor batched_eval(const MlpMapSet& set, std::span<const Vec3> points, const diff::Tensor& features,
                          const diff::Tensor& dir_features, Head head) {
    if (head == Head::density) {
        return diff::softplus(density_logits(set, points, features));
    }
    return diff::sigmoid(color_logits(set, points, features, dir_features));
}

ParameterAudit audit_parameters(const MlpMap& map, const MlpShape& shape, Head head) {
    return {map.stored_parameters(), std::int64_t{map.resolution} * map.resolution * shape.params(head)};
}

} // namespace dynmap::maps
