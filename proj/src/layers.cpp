#include "uavsec/layers.hpp"

namespace uavsec::ad {

Var Binder::operator()(const std::string& name) {
    if (auto it = bound_.find(name); it != bound_.end()) return it->second;
    Var v = mutable_ != nullptr ? tape_.parameter(mutable_->at(name)) : tape_.constant(const_->at(name).value);
    bound_.emplace(name, v);
    return v;
}

void add_affine(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
    params.add(name + ".weight", glorot_uniform(in, out, rng));
    params.add(name + ".bias", Tensor(1, out));
}

void add_prelu(ParameterSet& params, const std::string& name) { params.add(name + ".slope", Tensor::scalar(kPreluInitSlope)); }

Var affine(Binder& bind, const std::string& name, Var x) {
    return add(matmul(x, bind(name + ".weight")), bind(name + ".bias"));
}

Var prelu(Binder& bind, const std::string& name, Var x) { return prelu(x, bind(name + ".slope")); }

}  // namespace uavsec::ad
