#pragma once

#include "iden/checkpoint.hpp"
#include "iden/decode.hpp"
#include "iden/mlp.hpp"
#include "iden/modem.hpp"
#include "iden/phy.hpp"

namespace iden::ckpt {

// Named-array layouts for the trained components. Every container round-trips
// through the flat checkpoint format.

void put_mlp(ArrayMap& m, const std::string& prefix, const nn::Mlp& net);
nn::Mlp get_mlp(const ArrayMap& m, const std::string& prefix);

void put_mapper(ArrayMap& m, const modem::MapperNet& net);
modem::MapperNet get_mapper(const ArrayMap& m);

void put_demapper(ArrayMap& m, const modem::DemapperNet& net);
modem::DemapperNet get_demapper(const ArrayMap& m);

void put_hyper(ArrayMap& m, const dec::HyperNet& net);
dec::HyperNet get_hyper(const ArrayMap& m);

void put_flat(ArrayMap& m, const dec::IterWeights& w);
dec::IterWeights get_flat(const ArrayMap& m);

void put_eh(ArrayMap& m, const phy::EhNet& net);
phy::EhNet get_eh(const ArrayMap& m);

} // namespace iden::ckpt
