#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sarsfp/imaging.hpp"

namespace sarsfp {

struct LabeledDataset {
    std::vector<SarImage> images;
    std::vector<int> labels;
    std::vector<int> split;  // 0 = train, 1 = test, parallel to images
    int n_classes = 0;
};

double cross_entropy(const std::vector<double>& probs, int label);

struct TrainReport {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> epoch_losses;
};

// Small feed-forward classifiers standing in for f(.; theta_f). Four
// architectures of increasing capacity: "linear", "mlp", "cnn-small",
// "cnn-large". Forward/predict are pure; the attack never touches weights.
class Classifier {
public:
    Classifier() = default;

    static Classifier create(const std::string& architecture_id, int n_classes, int input_h,
                             int input_w, std::uint64_t seed);
    static const std::vector<std::string>& architecture_ids();

    const std::string& architecture_id() const { return architecture_id_; }
    int n_classes() const { return n_classes_; }
    int input_h() const { return input_h_; }
    int input_w() const { return input_w_; }

    std::vector<double> forward(const std::vector<double>& pixels) const;
    std::vector<double> forward(const SarImage& image) const;
    int predict(const std::vector<double>& pixels) const;
    int predict(const SarImage& image) const;

    // Plain mini-batch gradient descent on cross-entropy; deterministic per seed.
    TrainReport train(const LabeledDataset& dataset, int epochs, double lr, std::uint64_t seed,
                      int batch_size = 32);

    void save(const std::string& path) const;
    static Classifier load(const std::string& path);

    // Parameter blobs (weights/biases per layer) and their loss gradients for
    // one sample; exposed for the finite-difference backprop oracle.
    std::vector<std::vector<double>>& param_blobs() { return params_; }
    const std::vector<std::vector<double>>& param_blobs() const { return params_; }
    std::vector<std::vector<double>> loss_gradients(const std::vector<double>& pixels,
                                                    int label) const;

private:
    struct Layer {
        enum class Kind { AvgPool, Conv, Relu, MaxPool, Flatten, Fc };
        Kind kind;
        int pool = 0;                    // AvgPool/MaxPool factor
        int in_c = 0, in_h = 0, in_w = 0;
        int out_c = 0, out_h = 0, out_w = 0;
        int weight_blob = -1, bias_blob = -1;  // indices into params_, if any
    };

    void build_layers();
    void init_weights(std::uint64_t seed);
    std::vector<double> run_forward(const std::vector<double>& pixels,
                                    std::vector<std::vector<double>>* activations) const;
    void run_backward(const std::vector<std::vector<double>>& activations,
                      const std::vector<double>& probs, int label,
                      std::vector<std::vector<double>>& grads) const;
    void check_input(const std::vector<double>& pixels) const;

    std::string architecture_id_;
    int n_classes_ = 0;
    int input_h_ = 0, input_w_ = 0;
    std::vector<Layer> layers_;
    std::vector<std::vector<double>> params_;

    friend class ClassifierTrainer;
};

}  // namespace sarsfp
