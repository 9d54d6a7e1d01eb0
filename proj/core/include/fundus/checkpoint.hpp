#pragma once

#include <map>
#include <memory>
#include <string>

#include "fundus/adam.hpp"
#include "fundus/models.hpp"

namespace fundus {

// On-disk layout: magic "RFGC", version (4-byte LE unsigned), tensor count
// (8-byte LE unsigned), then per tensor: name byte-length (8-byte LE), UTF-8
// name, rank (8-byte LE), dims (8-byte LE each), payload of 8-byte LE
// IEEE-754 doubles. Optimizer tensors live under the reserved "opt/" prefix,
// architecture scalars under "meta/".
inline constexpr char kCheckpointMagic[4] = {'R', 'F', 'G', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensor_file(const std::string& path,
                       const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_tensor_file(const std::string& path);

void save_xunet(const std::string& path, XUnet& model,
                const AdamState* opt = nullptr);
// input_scale records the training resolution; 0 means scale-agnostic (the
// shared-weights multi-scale variant).
void save_classifier(const std::string& path, Classifier& model,
                     const AdamState* opt = nullptr,
                     std::size_t input_scale = 0);

struct LoadedXUnet {
    std::unique_ptr<XUnet> model;
    AdamState opt;
    bool has_opt = false;
};
struct LoadedClassifier {
    std::unique_ptr<Classifier> model;
    AdamState opt;
    bool has_opt = false;
    std::size_t input_scale = 0;
};

LoadedXUnet load_xunet(const std::string& path);
LoadedClassifier load_classifier(const std::string& path);

} // namespace fundus
