#pragma once

#include <string>
#include <vector>

namespace gpt2ref {

// Independent reference forward pass of the GPT-2-small decoder stack on a
// continuous token sequence [n x 768]: positional embeddings for positions
// 0..n-1, the first n_layers pre-norm blocks, then the final layer norm.
// Reads the checkpoint tensors itself (fused c_attn, Conv1D x*W+b layout)
// and computes with plain loops; shares no math with seismo::nn.
std::vector<double> forward(const std::string& checkpoint_path, int n_layers,
                            const std::vector<double>& tokens, int n);

}  // namespace gpt2ref
