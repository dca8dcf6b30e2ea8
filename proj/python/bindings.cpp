#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zoneforge/eval/metrics.hpp"
#include "zoneforge/eval/stats.hpp"
#include "zoneforge/phantom/phantom.hpp"
#include "zoneforge/prep/prep.hpp"
#include "zoneforge/train/trainer.hpp"

namespace py = pybind11;
using namespace zoneforge;

namespace {

using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<std::uint8_t> mask_vec(const MaskArray& a) {
    return {a.data(), a.data() + a.size()};
}

/// Arrays are (nz, ny, nx) C-order, which matches the x-fastest linear layout.
Dims dims_of(const MaskArray& a) {
    if (a.ndim() == 2)
        return {static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 1};
    if (a.ndim() == 3)
        return {static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)),
                static_cast<int>(a.shape(0))};
    throw ShapeError("expected a 2D or 3D array");
}

VolumeGrid volume_from(const F64Array& a, MapKind kind, const Spacing& sp) {
    if (a.ndim() != 3) throw ShapeError("expected a 3D (nz, ny, nx) array");
    const Dims dims{static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)),
                    static_cast<int>(a.shape(0))};
    return VolumeGrid(kind, dims, sp, std::vector<double>(a.data(), a.data() + a.size()));
}

py::array_t<double> volume_to(const VolumeGrid& v) {
    py::array_t<double> out({v.dims[2], v.dims[1], v.dims[0]});
    std::copy(v.values.begin(), v.values.end(), out.mutable_data());
    return out;
}

py::array_t<std::uint8_t> zone_to(const std::vector<std::uint8_t>& z, const Dims& d) {
    py::array_t<std::uint8_t> out({d[2], d[1], d[0]});
    std::copy(z.begin(), z.end(), out.mutable_data());
    return out;
}

/// Thin handle exposing seeded initialization and the forward pass.
class PyUnet {
public:
    PyUnet(int in_channels, const std::string& preset, std::uint64_t seed) {
        unet::ArchConfig arch;
        if (preset == "desk") arch = unet::ArchConfig::desk(in_channels);
        else if (preset == "paper") arch = unet::ArchConfig::paper(in_channels);
        else if (preset == "toy") arch = unet::ArchConfig::toy(in_channels);
        else throw ConfigError("preset must be desk, paper or toy");
        net_ = unet::init_params(arch, Rng(seed));
    }

    std::size_t param_count() const { return net_.flat.size(); }

    py::array_t<float> forward(const F32Array& x) {
        if (x.ndim() != 4) throw ShapeError("expected a (n, c, h, w) array");
        unet::Tensor4<float> t(static_cast<int>(x.shape(0)), static_cast<int>(x.shape(1)),
                               static_cast<int>(x.shape(2)), static_cast<int>(x.shape(3)));
        std::copy(x.data(), x.data() + x.size(), t.v.begin());
        const unet::Tensor4<float> y = unet::forward(net_, t);
        py::array_t<float> out({y.n, y.c, y.h, y.w});
        std::copy(y.v.begin(), y.v.end(), out.mutable_data());
        return out;
    }

private:
    unet::NetworkParams<float> net_;
};

} // namespace

PYBIND11_MODULE(_zoneforge, m) {
    m.doc() = "Prostate-zone segmentation pipeline on synthetic MRE phantoms";
    m.attr("__version__") = "0.1.0";
    m.attr("MAP_KINDS") = std::vector<std::string>{"t2w", "dwi_b", "adc", "mag", "sws", "phi"};

    // translators run newest-first: the base class must be registered first
    py::register_exception<Error>(m, "ZoneforgeError", PyExc_RuntimeError);
    py::register_exception<ComboError>(m, "ComboError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<EmptyMaskError>(m, "EmptyMaskError", PyExc_ValueError);
    py::register_exception<StatsError>(m, "StatsError", PyExc_ValueError);

    m.def(
        "dice",
        [](const MaskArray& a, const MaskArray& b) {
            return evalkit::dice(mask_vec(a), mask_vec(b));
        },
        py::arg("a"), py::arg("b"), "Dice overlap of two binary masks.");

    m.def(
        "hausdorff_mm",
        [](const MaskArray& a, const MaskArray& b, std::array<double, 3> spacing_mm,
           const std::string& mode) {
            const Dims dims = dims_of(a);
            if (dims != dims_of(b)) throw ShapeError("mask shapes differ");
            const auto hd_mode =
                mode == "3d" ? evalkit::HdMode::Volume3D : evalkit::HdMode::Slice2D;
            return evalkit::hausdorff_mm(mask_vec(a), mask_vec(b), dims,
                                         {spacing_mm[0], spacing_mm[1], spacing_mm[2]},
                                         hd_mode);
        },
        py::arg("a"), py::arg("b"), py::arg("spacing_mm") = std::array<double, 3>{1, 1, 1},
        py::arg("mode") = "2d",
        "Boundary Hausdorff distance in mm ((nz, ny, nx) or (ny, nx) arrays).");

    m.def(
        "sen_spc",
        [](const MaskArray& pred, const MaskArray& truth) {
            const auto s = evalkit::sen_spc(mask_vec(pred), mask_vec(truth));
            return py::make_tuple(s.sen, s.spc);
        },
        py::arg("pred"), py::arg("truth"), "Sensitivity and specificity of pred vs truth.");

    m.def(
        "welch_t",
        [](const F64Array& x, const F64Array& y) {
            const auto r = evalkit::welch_t({x.data(), x.data() + x.size()},
                                            {y.data(), y.data() + y.size()});
            py::dict d;
            d["t"] = r.t;
            d["dof"] = r.dof;
            d["p"] = r.p;
            return d;
        },
        py::arg("x"), py::arg("y"), "Welch unequal-variance t-test (two-sided).");

    m.def(
        "ce_loss",
        [](const F64Array& pred, const F64Array& target) {
            if (pred.ndim() != target.ndim()) throw ShapeError("rank mismatch");
            unet::Tensor4<double> p(1, 1, 1, static_cast<int>(pred.size()));
            unet::Tensor4<double> t(1, 1, 1, static_cast<int>(target.size()));
            if (pred.size() != target.size()) throw ShapeError("size mismatch");
            std::copy(pred.data(), pred.data() + pred.size(), p.v.begin());
            std::copy(target.data(), target.data() + target.size(), t.v.begin());
            return train::ce_loss_value(p, t);
        },
        py::arg("pred"), py::arg("target"),
        "Mean binary cross-entropy with 1e-7 clipping.");

    m.def(
        "validate_combo",
        [](const std::vector<std::string>& names) {
            const InputCombo combo = InputCombo::parse(names);
            std::vector<std::string> out;
            for (MapKind k : combo.kinds()) out.push_back(to_string(k));
            return out;
        },
        py::arg("names"),
        "Canonicalize an input combination; raises ComboError when not one of the 14.");

    m.def("canonical_combos", [] {
        std::vector<std::string> out;
        for (const auto& c : InputCombo::canonical_list()) out.push_back(c.name());
        return out;
    });

    m.def(
        "synth_dwi",
        [](const F64Array& adc, double s0, const std::vector<double>& b) {
            const VolumeGrid vol = volume_from(adc, MapKind::ADC, {1, 1, 1});
            phantom::DwiProtocol proto;
            proto.b = b;
            const VolumeGrid s0v =
                phantom::DwiProtocol::uniform_s0(vol.dims, vol.spacing_mm, s0);
            py::list out;
            for (const auto& sig : phantom::synth_dwi(vol, s0v, proto))
                out.append(volume_to(sig));
            return out;
        },
        py::arg("adc"), py::arg("s0") = 1000.0,
        py::arg("b") = std::vector<double>{0, 50, 500, 1000, 1400},
        "Monoexponential DWI signals, one array per b-value.");

    m.def(
        "adc_fit",
        [](const std::vector<F64Array>& signals, const std::vector<double>& b) {
            phantom::DwiProtocol proto;
            proto.b = b;
            std::vector<VolumeGrid> vols;
            for (const auto& s : signals)
                vols.push_back(volume_from(s, MapKind::DWI_b, {1, 1, 1}));
            const auto fit = phantom::adc_fit(vols, proto);
            return py::make_tuple(volume_to(fit.adc), fit.flagged);
        },
        py::arg("signals"), py::arg("b") = std::vector<double>{0, 50, 500, 1000, 1400},
        "Per-voxel log-linear ADC fit; returns (adc, flagged_voxel_count).");

    m.def(
        "generate_phantom",
        [](std::uint64_t seed, const std::string& scale) {
            const phantom::PhantomConfig cfg = scale == "paper"
                                                   ? phantom::PhantomConfig::paper_scale()
                                                   : phantom::PhantomConfig{};
            const CaseRecord rec = phantom::generate_case(cfg, Rng(seed));
            py::dict maps;
            for (const auto& [kind, vol] : rec.maps)
                maps[to_string(kind).c_str()] = volume_to(vol);
            py::dict masks;
            masks["pg"] = zone_to(rec.truth.pg, rec.truth.dims);
            masks["cz"] = zone_to(rec.truth.cz, rec.truth.dims);
            masks["pz"] = zone_to(rec.truth.pz, rec.truth.dims);
            py::dict out;
            out["maps"] = maps;
            out["masks"] = masks;
            out["spacing_mm"] = cfg.spacing_mm;
            return out;
        },
        py::arg("seed") = 1, py::arg("scale") = "desk",
        "Six co-registered synthetic maps plus PG/CZ/PZ ground-truth masks.");

    m.def(
        "sample_displacement",
        [](int width, int height, double alpha, double sigma, std::uint64_t seed) {
            prep::ElasticParams p;
            p.alpha = alpha;
            p.sigma = sigma;
            Rng rng(seed);
            const auto f = prep::sample_displacement(width, height, p, rng);
            py::array_t<double> dx({height, width}), dy({height, width});
            std::copy(f.dx.begin(), f.dx.end(), dx.mutable_data());
            std::copy(f.dy.begin(), f.dy.end(), dy.mutable_data());
            return py::make_tuple(dx, dy);
        },
        py::arg("width"), py::arg("height"), py::arg("alpha") = 21.0,
        py::arg("sigma") = 512.0, py::arg("seed") = 1,
        "One smoothed random displacement field (dx, dy), |d| <= alpha.");

    py::class_<PyUnet>(m, "Unet",
                       "Dense U-net with seeded He initialization; forward maps "
                       "(n, c, h, w) float32 inputs to 3-channel sigmoid outputs.")
        .def(py::init<int, const std::string&, std::uint64_t>(), py::arg("in_channels") = 1,
             py::arg("preset") = "toy", py::arg("seed") = 1)
        .def_property_readonly("param_count", &PyUnet::param_count)
        .def("forward", &PyUnet::forward, py::arg("x"));
}
