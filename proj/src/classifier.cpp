#include "sarsfp/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "sarsfp/errors.hpp"
#include "sarsfp/rng.hpp"

namespace sarsfp {

double cross_entropy(const std::vector<double>& probs, int label) {
    if (label < 0 || label >= static_cast<int>(probs.size()))
        throw ValidationError("cross_entropy: label out of range");
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-12));
}

const std::vector<std::string>& Classifier::architecture_ids() {
    static const std::vector<std::string> ids = {"linear", "mlp", "cnn-small", "cnn-large"};
    return ids;
}

Classifier Classifier::create(const std::string& architecture_id, int n_classes, int input_h,
                              int input_w, std::uint64_t seed) {
    if (std::find(architecture_ids().begin(), architecture_ids().end(), architecture_id) ==
        architecture_ids().end()) {
        std::string valid;
        for (const auto& id : architecture_ids()) {
            if (!valid.empty()) valid += ", ";
            valid += id;
        }
        throw ConfigError("unknown architecture \"" + architecture_id + "\"; valid: " + valid);
    }
    if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
    Classifier c;
    c.architecture_id_ = architecture_id;
    c.n_classes_ = n_classes;
    c.input_h_ = input_h;
    c.input_w_ = input_w;
    c.build_layers();
    c.init_weights(seed);
    return c;
}

void Classifier::build_layers() {
    layers_.clear();
    params_.clear();
    int c = 1, h = input_h_, w = input_w_;

    auto add_pool = [&](Layer::Kind kind, int factor) {
        if (h % factor != 0 || w % factor != 0)
            throw ConfigError("input shape " + std::to_string(input_h_) + "x" +
                              std::to_string(input_w_) + " incompatible with architecture " +
                              architecture_id_);
        Layer l;
        l.kind = kind;
        l.pool = factor;
        l.in_c = c; l.in_h = h; l.in_w = w;
        l.out_c = c; l.out_h = h / factor; l.out_w = w / factor;
        layers_.push_back(l);
        h /= factor; w /= factor;
    };
    auto add_conv = [&](int out_c) {
        Layer l;
        l.kind = Layer::Kind::Conv;
        l.in_c = c; l.in_h = h; l.in_w = w;
        l.out_c = out_c; l.out_h = h; l.out_w = w;
        l.weight_blob = static_cast<int>(params_.size());
        params_.emplace_back(static_cast<std::size_t>(out_c) * c * 9);
        l.bias_blob = static_cast<int>(params_.size());
        params_.emplace_back(static_cast<std::size_t>(out_c));
        layers_.push_back(l);
        c = out_c;
    };
    auto add_relu = [&]() {
        Layer l;
        l.kind = Layer::Kind::Relu;
        l.in_c = c; l.in_h = h; l.in_w = w;
        l.out_c = c; l.out_h = h; l.out_w = w;
        layers_.push_back(l);
    };
    auto add_fc = [&](int out_len) {
        Layer l;
        l.kind = Layer::Kind::Fc;
        l.in_c = c; l.in_h = h; l.in_w = w;
        l.out_c = out_len; l.out_h = 1; l.out_w = 1;
        const std::size_t in_len = static_cast<std::size_t>(c) * h * w;
        l.weight_blob = static_cast<int>(params_.size());
        params_.emplace_back(in_len * out_len);
        l.bias_blob = static_cast<int>(params_.size());
        params_.emplace_back(static_cast<std::size_t>(out_len));
        layers_.push_back(l);
        c = out_len; h = 1; w = 1;
    };

    if (architecture_id_ == "linear") {
        add_fc(n_classes_);
    } else if (architecture_id_ == "mlp") {
        add_fc(32);
        add_relu();
        add_fc(n_classes_);
    } else if (architecture_id_ == "cnn-small") {
        add_pool(Layer::Kind::AvgPool, 4);
        add_conv(8);
        add_relu();
        add_pool(Layer::Kind::MaxPool, 2);
        add_conv(16);
        add_relu();
        add_pool(Layer::Kind::MaxPool, 2);
        add_fc(n_classes_);
    } else {  // cnn-large
        add_pool(Layer::Kind::AvgPool, 2);
        add_conv(8);
        add_relu();
        add_pool(Layer::Kind::MaxPool, 2);
        add_conv(16);
        add_relu();
        add_pool(Layer::Kind::MaxPool, 2);
        add_conv(32);
        add_relu();
        add_pool(Layer::Kind::MaxPool, 2);
        add_conv(32);
        add_relu();
        add_pool(Layer::Kind::MaxPool, 2);
        add_fc(n_classes_);
    }
}

void Classifier::init_weights(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "weight-init"));
    for (const Layer& l : layers_) {
        if (l.weight_blob < 0) continue;
        const std::size_t fan_in = (l.kind == Layer::Kind::Conv)
                                       ? static_cast<std::size_t>(l.in_c) * 9
                                       : static_cast<std::size_t>(l.in_c) * l.in_h * l.in_w;
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : params_[static_cast<std::size_t>(l.weight_blob)])
            v = rng.uniform(-scale, scale);
        for (double& v : params_[static_cast<std::size_t>(l.bias_blob)]) v = 0.0;
    }
}

void Classifier::check_input(const std::vector<double>& pixels) const {
    if (pixels.size() != static_cast<std::size_t>(input_h_) * input_w_)
        throw ValidationError("classifier input shape mismatch: expected " +
                              std::to_string(input_h_) + "x" + std::to_string(input_w_));
}

namespace {

void softmax_inplace(std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

}  // namespace

std::vector<double> Classifier::run_forward(const std::vector<double>& pixels,
                                            std::vector<std::vector<double>>* activations) const {
    check_input(pixels);
    std::vector<double> cur = pixels;
    if (activations) {
        activations->clear();
        activations->push_back(cur);
    }
    for (const Layer& l : layers_) {
        std::vector<double> next(static_cast<std::size_t>(l.out_c) * l.out_h * l.out_w, 0.0);
        switch (l.kind) {
            case Layer::Kind::AvgPool: {
                const double inv = 1.0 / (l.pool * l.pool);
                for (int ch = 0; ch < l.in_c; ++ch)
                    for (int y = 0; y < l.out_h; ++y)
                        for (int x = 0; x < l.out_w; ++x) {
                            double s = 0.0;
                            for (int py = 0; py < l.pool; ++py)
                                for (int px = 0; px < l.pool; ++px)
                                    s += cur[(static_cast<std::size_t>(ch) * l.in_h +
                                              (y * l.pool + py)) * l.in_w + (x * l.pool + px)];
                            next[(static_cast<std::size_t>(ch) * l.out_h + y) * l.out_w + x] = s * inv;
                        }
                break;
            }
            case Layer::Kind::MaxPool: {
                for (int ch = 0; ch < l.in_c; ++ch)
                    for (int y = 0; y < l.out_h; ++y)
                        for (int x = 0; x < l.out_w; ++x) {
                            double best = -std::numeric_limits<double>::max();
                            for (int py = 0; py < l.pool; ++py)
                                for (int px = 0; px < l.pool; ++px)
                                    best = std::max(
                                        best, cur[(static_cast<std::size_t>(ch) * l.in_h +
                                                   (y * l.pool + py)) * l.in_w + (x * l.pool + px)]);
                            next[(static_cast<std::size_t>(ch) * l.out_h + y) * l.out_w + x] = best;
                        }
                break;
            }
            case Layer::Kind::Relu: {
                for (std::size_t i = 0; i < cur.size(); ++i) next[i] = std::max(cur[i], 0.0);
                break;
            }
            case Layer::Kind::Conv: {
                const auto& wts = params_[static_cast<std::size_t>(l.weight_blob)];
                const auto& bias = params_[static_cast<std::size_t>(l.bias_blob)];
                for (int oc = 0; oc < l.out_c; ++oc) {
                    for (int y = 0; y < l.out_h; ++y)
                        for (int x = 0; x < l.out_w; ++x) {
                            double s = bias[static_cast<std::size_t>(oc)];
                            for (int ic = 0; ic < l.in_c; ++ic)
                                for (int ky = 0; ky < 3; ++ky) {
                                    const int iy = y + ky - 1;
                                    if (iy < 0 || iy >= l.in_h) continue;
                                    for (int kx = 0; kx < 3; ++kx) {
                                        const int ix = x + kx - 1;
                                        if (ix < 0 || ix >= l.in_w) continue;
                                        s += wts[((static_cast<std::size_t>(oc) * l.in_c + ic) * 3 +
                                                  ky) * 3 + kx] *
                                             cur[(static_cast<std::size_t>(ic) * l.in_h + iy) *
                                                     l.in_w + ix];
                                    }
                                }
                            next[(static_cast<std::size_t>(oc) * l.out_h + y) * l.out_w + x] = s;
                        }
                }
                break;
            }
            case Layer::Kind::Flatten:
                next = cur;
                break;
            case Layer::Kind::Fc: {
                const auto& wts = params_[static_cast<std::size_t>(l.weight_blob)];
                const auto& bias = params_[static_cast<std::size_t>(l.bias_blob)];
                const std::size_t in_len = cur.size();
                for (int o = 0; o < l.out_c; ++o) {
                    double s = bias[static_cast<std::size_t>(o)];
                    const double* row = wts.data() + static_cast<std::size_t>(o) * in_len;
                    for (std::size_t i = 0; i < in_len; ++i) s += row[i] * cur[i];
                    next[static_cast<std::size_t>(o)] = s;
                }
                break;
            }
        }
        cur = std::move(next);
        if (activations) activations->push_back(cur);
    }
    softmax_inplace(cur);
    return cur;
}

void Classifier::run_backward(const std::vector<std::vector<double>>& activations,
                              const std::vector<double>& probs, int label,
                              std::vector<std::vector<double>>& grads) const {
    // dL/dlogits for softmax + cross-entropy.
    std::vector<double> d_out = probs;
    d_out[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const std::vector<double>& in = activations[li];
        std::vector<double> d_in(in.size(), 0.0);
        switch (l.kind) {
            case Layer::Kind::AvgPool: {
                const double inv = 1.0 / (l.pool * l.pool);
                for (int ch = 0; ch < l.in_c; ++ch)
                    for (int y = 0; y < l.out_h; ++y)
                        for (int x = 0; x < l.out_w; ++x) {
                            const double g =
                                d_out[(static_cast<std::size_t>(ch) * l.out_h + y) * l.out_w + x] *
                                inv;
                            for (int py = 0; py < l.pool; ++py)
                                for (int px = 0; px < l.pool; ++px)
                                    d_in[(static_cast<std::size_t>(ch) * l.in_h +
                                          (y * l.pool + py)) * l.in_w + (x * l.pool + px)] += g;
                        }
                break;
            }
            case Layer::Kind::MaxPool: {
                // Ties route to the first (row-major) maximum for determinism.
                for (int ch = 0; ch < l.in_c; ++ch)
                    for (int y = 0; y < l.out_h; ++y)
                        for (int x = 0; x < l.out_w; ++x) {
                            double best = -std::numeric_limits<double>::max();
                            std::size_t best_idx = 0;
                            for (int py = 0; py < l.pool; ++py)
                                for (int px = 0; px < l.pool; ++px) {
                                    const std::size_t idx =
                                        (static_cast<std::size_t>(ch) * l.in_h +
                                         (y * l.pool + py)) * l.in_w + (x * l.pool + px);
                                    if (in[idx] > best) {
                                        best = in[idx];
                                        best_idx = idx;
                                    }
                                }
                            d_in[best_idx] +=
                                d_out[(static_cast<std::size_t>(ch) * l.out_h + y) * l.out_w + x];
                        }
                break;
            }
            case Layer::Kind::Relu: {
                for (std::size_t i = 0; i < in.size(); ++i)
                    d_in[i] = in[i] > 0.0 ? d_out[i] : 0.0;
                break;
            }
            case Layer::Kind::Conv: {
                const auto& wts = params_[static_cast<std::size_t>(l.weight_blob)];
                auto& d_w = grads[static_cast<std::size_t>(l.weight_blob)];
                auto& d_b = grads[static_cast<std::size_t>(l.bias_blob)];
                for (int oc = 0; oc < l.out_c; ++oc)
                    for (int y = 0; y < l.out_h; ++y)
                        for (int x = 0; x < l.out_w; ++x) {
                            const double g =
                                d_out[(static_cast<std::size_t>(oc) * l.out_h + y) * l.out_w + x];
                            if (g == 0.0) continue;
                            d_b[static_cast<std::size_t>(oc)] += g;
                            for (int ic = 0; ic < l.in_c; ++ic)
                                for (int ky = 0; ky < 3; ++ky) {
                                    const int iy = y + ky - 1;
                                    if (iy < 0 || iy >= l.in_h) continue;
                                    for (int kx = 0; kx < 3; ++kx) {
                                        const int ix = x + kx - 1;
                                        if (ix < 0 || ix >= l.in_w) continue;
                                        const std::size_t w_idx =
                                            ((static_cast<std::size_t>(oc) * l.in_c + ic) * 3 + ky) *
                                                3 + kx;
                                        const std::size_t in_idx =
                                            (static_cast<std::size_t>(ic) * l.in_h + iy) * l.in_w +
                                            ix;
                                        d_w[w_idx] += g * in[in_idx];
                                        d_in[in_idx] += g * wts[w_idx];
                                    }
                                }
                        }
                break;
            }
            case Layer::Kind::Flatten:
                d_in = d_out;
                break;
            case Layer::Kind::Fc: {
                const auto& wts = params_[static_cast<std::size_t>(l.weight_blob)];
                auto& d_w = grads[static_cast<std::size_t>(l.weight_blob)];
                auto& d_b = grads[static_cast<std::size_t>(l.bias_blob)];
                const std::size_t in_len = in.size();
                for (int o = 0; o < l.out_c; ++o) {
                    const double g = d_out[static_cast<std::size_t>(o)];
                    if (g == 0.0) continue;
                    d_b[static_cast<std::size_t>(o)] += g;
                    double* d_row = d_w.data() + static_cast<std::size_t>(o) * in_len;
                    const double* row = wts.data() + static_cast<std::size_t>(o) * in_len;
                    for (std::size_t i = 0; i < in_len; ++i) {
                        d_row[i] += g * in[i];
                        d_in[i] += g * row[i];
                    }
                }
                break;
            }
        }
        d_out = std::move(d_in);
    }
}

std::vector<double> Classifier::forward(const std::vector<double>& pixels) const {
    return run_forward(pixels, nullptr);
}

std::vector<double> Classifier::forward(const SarImage& image) const {
    if (!image.normalized) throw ValidationError("classifier input must be a normalized image");
    return forward(image.pixels);
}

int Classifier::predict(const std::vector<double>& pixels) const {
    const std::vector<double> probs = forward(pixels);
    // Ties break toward the lowest class index.
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

int Classifier::predict(const SarImage& image) const {
    if (!image.normalized) throw ValidationError("classifier input must be a normalized image");
    return predict(image.pixels);
}

std::vector<std::vector<double>> Classifier::loss_gradients(const std::vector<double>& pixels,
                                                            int label) const {
    std::vector<std::vector<double>> grads;
    grads.reserve(params_.size());
    for (const auto& blob : params_) grads.emplace_back(blob.size(), 0.0);
    std::vector<std::vector<double>> activations;
    const std::vector<double> probs = run_forward(pixels, &activations);
    run_backward(activations, probs, label, grads);
    return grads;
}

TrainReport Classifier::train(const LabeledDataset& dataset, int epochs, double lr,
                              std::uint64_t seed, int batch_size) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < dataset.images.size(); ++i)
        (dataset.split[i] == 0 ? train_idx : test_idx).push_back(i);
    if (train_idx.empty()) throw ConfigError("training set is empty");

    TrainReport report;
    Rng rng(derive_seed(seed, "train-shuffle"));
    std::vector<std::vector<double>> grads;
    for (const auto& blob : params_) grads.emplace_back(blob.size(), 0.0);
    std::vector<std::vector<double>> activations;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = train_idx.size() - 1; i > 0; --i)
            std::swap(train_idx[i], train_idx[rng.uniform_index(i + 1)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(batch_size)) {
            const std::size_t end =
                std::min(train_idx.size(), start + static_cast<std::size_t>(batch_size));
            for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t s = train_idx[i];
                const std::vector<double> probs =
                    run_forward(dataset.images[s].pixels, &activations);
                epoch_loss += cross_entropy(probs, dataset.labels[s]);
                run_backward(activations, probs, dataset.labels[s], grads);
            }
            const double scale = lr / static_cast<double>(end - start);
            for (std::size_t b = 0; b < params_.size(); ++b)
                for (std::size_t i = 0; i < params_[b].size(); ++i)
                    params_[b][i] -= scale * grads[b][i];
        }
        epoch_loss /= static_cast<double>(train_idx.size());
        if (!std::isfinite(epoch_loss))
            throw ConfigError("training diverged (loss is not finite); try a lower learning rate");
        report.epoch_losses.push_back(epoch_loss);
    }

    auto accuracy = [this, &dataset](const std::vector<std::size_t>& idx) {
        if (idx.empty()) return 0.0;
        std::size_t correct = 0;
        for (std::size_t s : idx)
            if (predict(dataset.images[s].pixels) == dataset.labels[s]) ++correct;
        return static_cast<double>(correct) / static_cast<double>(idx.size());
    };
    report.train_accuracy = accuracy(train_idx);
    report.test_accuracy = accuracy(test_idx);
    return report;
}

namespace {

constexpr char kMagic[4] = {'S', 'F', 'P', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (static_cast<std::size_t>(in.gcount()) != sizeof(T))
        throw ParseError("corrupt model file (truncated): " + path);
}

}  // namespace

void Classifier::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path);
    out.write(kMagic, 4);
    write_pod(out, kFormatVersion);
    const auto arch_len = static_cast<std::uint32_t>(architecture_id_.size());
    write_pod(out, arch_len);
    out.write(architecture_id_.data(), arch_len);
    write_pod(out, static_cast<std::uint32_t>(n_classes_));
    write_pod(out, static_cast<std::uint32_t>(input_h_));
    write_pod(out, static_cast<std::uint32_t>(input_w_));
    write_pod(out, static_cast<std::uint64_t>(params_.size()));
    for (const auto& blob : params_) {
        write_pod(out, static_cast<std::uint64_t>(blob.size()));
        out.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write on model file: " + path);
}

Classifier Classifier::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError("not a model file (bad magic): " + path);
    std::uint32_t version = 0;
    read_pod(in, version, path);
    if (version != kFormatVersion)
        throw ParseError("unsupported model format version " + std::to_string(version) + ": " + path);
    std::uint32_t arch_len = 0;
    read_pod(in, arch_len, path);
    std::string arch(arch_len, '\0');
    in.read(arch.data(), arch_len);
    if (static_cast<std::uint32_t>(in.gcount()) != arch_len)
        throw ParseError("corrupt model file (truncated): " + path);
    std::uint32_t n_classes = 0, input_h = 0, input_w = 0;
    read_pod(in, n_classes, path);
    read_pod(in, input_h, path);
    read_pod(in, input_w, path);
    Classifier c = create(arch, static_cast<int>(n_classes), static_cast<int>(input_h),
                          static_cast<int>(input_w), 0);
    std::uint64_t blob_count = 0;
    read_pod(in, blob_count, path);
    if (blob_count != c.params_.size())
        throw ParseError("corrupt model file (blob count mismatch): " + path);
    for (auto& blob : c.params_) {
        std::uint64_t len = 0;
        read_pod(in, len, path);
        if (len != blob.size()) throw ParseError("corrupt model file (shape mismatch): " + path);
        in.read(reinterpret_cast<char*>(blob.data()),
                static_cast<std::streamsize>(blob.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != blob.size() * sizeof(double))
            throw ParseError("corrupt model file (truncated): " + path);
    }
    return c;
}

}  // namespace sarsfp
