#include "mponet/network.hpp"

namespace mponet {

namespace {

// distinct deterministic stream per layer (splitmix64 step)
std::uint64_t layer_seed(std::uint64_t seed, std::uint64_t index)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FC2: 28x28 -> 256 -> 10
constexpr std::size_t kFc2In = 784, kFc2Hidden = 256, kFc2Classes = 10;

MpoStructure fc2_mpo1(std::size_t bond_dim)
{
    return make_structure({4, 4, 4, 4}, {4, 7, 7, 4}, bond_dim);
}

MpoStructure fc2_mpo2()
{
    return make_structure({1, 1, 10, 1}, {4, 4, 4, 4}, 4);
}

// LeNet-5 linear tail: 400 -> 120 -> 84 -> 10
MpoStructure lenet_mpo3()
{
    return make_structure({2, 5, 6, 2}, {2, 10, 10, 2}, 4);
}

MpoStructure lenet_mpo4()
{
    return make_structure({2, 3, 7, 2}, {2, 5, 6, 2}, 4);
}

MpoStructure lenet_mpo5()
{
    return make_structure({1, 5, 2, 1}, {2, 3, 7, 2}, 2);
}

} // namespace

Network build_fc2(Variant v, std::size_t bond_dim, std::uint64_t seed)
{
    Network net;
    if (v == Variant::dense) {
        net.add(DenseLinear::random(kFc2Hidden, kFc2In, layer_seed(seed, 0)));
        net.add(ReLU{});
        net.add(DenseLinear::random(kFc2Classes, kFc2Hidden, layer_seed(seed, 1)));
        net.add(Softmax{});
    } else {
        net.add(MpoLinear(init_random(fc2_mpo1(bond_dim), layer_seed(seed, 0))));
        net.add(ReLU{});
        net.add(MpoLinear(init_random(fc2_mpo2(), layer_seed(seed, 1))));
        net.add(Softmax{});
    }
    return net;
}

Network build_lenet5(Variant v, std::uint64_t seed)
{
    Network net;
    net.add(Conv2D::random(6, 1, 5, 5, 1, Padding::same, layer_seed(seed, 0)));
    net.add(ReLU{});
    net.add(MaxPool(2, 2, 2));
    net.add(Conv2D::random(16, 6, 5, 5, 1, Padding::none, layer_seed(seed, 1)));
    net.add(ReLU{});
    net.add(MaxPool(2, 2, 2));
    if (v == Variant::dense) {
        // the third conv covers its whole 5x5x16 input: a 400 -> 120 linear map
        net.add(DenseLinear::random(120, 400, layer_seed(seed, 2)));
        net.add(ReLU{});
        net.add(DenseLinear::random(84, 120, layer_seed(seed, 3)));
        net.add(ReLU{});
        net.add(DenseLinear::random(10, 84, layer_seed(seed, 4)));
        net.add(Softmax{});
    } else {
        net.add(MpoLinear(init_random(lenet_mpo3(), layer_seed(seed, 2))));
        net.add(ReLU{});
        net.add(MpoLinear(init_random(lenet_mpo4(), layer_seed(seed, 3))));
        net.add(ReLU{});
        net.add(MpoLinear(init_random(lenet_mpo5(), layer_seed(seed, 4))));
        net.add(Softmax{});
    }
    return net;
}

Network densified_copy(const Network& net)
{
    Network out;
    for (std::size_t i = 0; i < net.depth(); ++i) {
        const Layer& l = net.layer(i);
        if (const auto* m = dynamic_cast<const MpoLinear*>(&l)) {
            Tensor w = to_dense(m->mpo());
            out.add(DenseLinear(std::move(w), m->mpo().bias));
        } else {
            out.add(l.clone());
        }
    }
    return out;
}

RatioReport ratio_report(Model model, std::size_t bond_dim)
{
    RatioReport report;
    if (model == Model::fc2) {
        report.layers.push_back({"fc1 784->256", kFc2In * kFc2Hidden,
                                 param_count(fc2_mpo1(bond_dim))});
        report.layers.push_back(
            {"fc2 256->10", kFc2Hidden * kFc2Classes, param_count(fc2_mpo2())});
    } else {
        report.layers.push_back({"conv3 400->120", 400u * 120u, param_count(lenet_mpo3())});
        report.layers.push_back({"fc4 120->84", 120u * 84u, param_count(lenet_mpo4())});
        report.layers.push_back({"fc5 84->10", 84u * 10u, param_count(lenet_mpo5())});
    }
    std::vector<std::size_t> mpo, ori;
    for (const auto& e : report.layers) {
        mpo.push_back(e.mpo);
        ori.push_back(e.original);
    }
    report.rho = compression_ratio(mpo, ori);
    return report;
}

} // namespace mponet
