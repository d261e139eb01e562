#pragma once

#include "uavsec/autodiff.hpp"

#include <map>
#include <string>

namespace uavsec::ad {

// Binds named parameters of a set onto a tape. A mutable set yields trainable
// leaves; a const set yields constants (inference, target networks). Each name
// is bound at most once per binder.
class Binder {
  public:
    Binder(Tape& tape, ParameterSet& params) : tape_(tape), mutable_(&params), const_(&params) {}
    Binder(Tape& tape, const ParameterSet& params) : tape_(tape), const_(&params) {}

    Var operator()(const std::string& name);
    Tape& tape() { return tape_; }
    bool trainable() const { return mutable_ != nullptr; }

  private:
    Tape& tape_;
    ParameterSet* mutable_ = nullptr;
    const ParameterSet* const_ = nullptr;
    std::map<std::string, Var> bound_;
};

// name.weight [in, out] Glorot-uniform, name.bias [1, out] zeros.
void add_affine(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);
// name.slope [1, 1] initialised to kPreluInitSlope.
void add_prelu(ParameterSet& params, const std::string& name);

// x * W + b
Var affine(Binder& bind, const std::string& name, Var x);
Var prelu(Binder& bind, const std::string& name, Var x);

}  // namespace uavsec::ad
