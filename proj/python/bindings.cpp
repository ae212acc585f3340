// Python bindings for the toolkit's main operations. Matrices cross the
// boundary as numpy float64 arrays, masks as uint8 (H, W), probability
// volumes as float64 (planes, H, W) and frames as float64 (H, W, 3).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vospipe/attention.hpp"
#include "vospipe/config.hpp"
#include "vospipe/fusion.hpp"
#include "vospipe/image.hpp"
#include "vospipe/io.hpp"
#include "vospipe/memory_bank.hpp"
#include "vospipe/metrics.hpp"
#include "vospipe/postprocess.hpp"
#include "vospipe/propagation.hpp"
#include "vospipe/synthetic.hpp"

namespace py = pybind11;
using namespace vospipe;

namespace {

EmbeddingMatrix matrix_from_array(const py::array_t<double>& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw ShapeError("expected a 2-D array");
  EmbeddingMatrix m(static_cast<std::size_t>(buf.shape[0]),
                    static_cast<std::size_t>(buf.shape[1]));
  const auto view = array.unchecked<2>();
  for (py::ssize_t i = 0; i < buf.shape[0]; ++i) {
    for (py::ssize_t j = 0; j < buf.shape[1]; ++j) {
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = view(i, j);
    }
  }
  return m;
}

py::array_t<double> array_from_matrix(const EmbeddingMatrix& m) {
  py::array_t<double> array({m.rows(), m.cols()});
  auto view = array.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      view(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = m(i, j);
    }
  }
  return array;
}

Frame frame_from_array(const py::array_t<double>& array) {
  const auto buf = array.request();
  if (buf.ndim != 3 || buf.shape[2] != 3) {
    throw ShapeError("expected an (H, W, 3) array");
  }
  Frame frame(static_cast<int>(buf.shape[1]), static_cast<int>(buf.shape[0]));
  const auto view = array.unchecked<3>();
  for (py::ssize_t y = 0; y < buf.shape[0]; ++y) {
    for (py::ssize_t x = 0; x < buf.shape[1]; ++x) {
      for (int c = 0; c < 3; ++c) {
        frame.at(static_cast<int>(x), static_cast<int>(y), c) = view(y, x, c);
      }
    }
  }
  return frame;
}

py::array_t<double> array_from_frame(const Frame& frame) {
  py::array_t<double> array({static_cast<std::size_t>(frame.height),
                             static_cast<std::size_t>(frame.width),
                             static_cast<std::size_t>(3)});
  auto view = array.mutable_unchecked<3>();
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      for (int c = 0; c < 3; ++c) view(y, x, c) = frame.at(x, y, c);
    }
  }
  return array;
}

LabelMask mask_from_array(const py::array_t<std::uint8_t>& array) {
  const auto buf = array.request();
  if (buf.ndim != 2) throw ShapeError("expected an (H, W) uint8 array");
  LabelMask mask(static_cast<int>(buf.shape[1]),
                 static_cast<int>(buf.shape[0]));
  const auto view = array.unchecked<2>();
  for (py::ssize_t y = 0; y < buf.shape[0]; ++y) {
    for (py::ssize_t x = 0; x < buf.shape[1]; ++x) {
      mask.at(static_cast<int>(x), static_cast<int>(y)) = view(y, x);
    }
  }
  return mask;
}

py::array_t<std::uint8_t> array_from_mask(const LabelMask& mask) {
  py::array_t<std::uint8_t> array({static_cast<std::size_t>(mask.height),
                                   static_cast<std::size_t>(mask.width)});
  auto view = array.mutable_unchecked<2>();
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) view(y, x) = mask.at(x, y);
  }
  return array;
}

ProbabilityVolume volume_from_array(const py::array_t<double>& array) {
  const auto buf = array.request();
  if (buf.ndim != 3) throw ShapeError("expected a (planes, H, W) array");
  ProbabilityVolume volume(static_cast<int>(buf.shape[2]),
                           static_cast<int>(buf.shape[1]),
                           static_cast<int>(buf.shape[0]));
  const auto view = array.unchecked<3>();
  for (py::ssize_t p = 0; p < buf.shape[0]; ++p) {
    for (py::ssize_t y = 0; y < buf.shape[1]; ++y) {
      for (py::ssize_t x = 0; x < buf.shape[2]; ++x) {
        volume.at(static_cast<int>(p), static_cast<int>(x),
                  static_cast<int>(y)) = view(p, y, x);
      }
    }
  }
  return volume;
}

py::array_t<double> array_from_volume(const ProbabilityVolume& volume) {
  py::array_t<double> array({static_cast<std::size_t>(volume.planes),
                             static_cast<std::size_t>(volume.height),
                             static_cast<std::size_t>(volume.width)});
  auto view = array.mutable_unchecked<3>();
  for (int p = 0; p < volume.planes; ++p) {
    for (int y = 0; y < volume.height; ++y) {
      for (int x = 0; x < volume.width; ++x) view(p, y, x) = volume.at(p, x, y);
    }
  }
  return array;
}

prop::PropagationConfig make_prop_config(const std::string& variant,
                                         double temperature, int stride,
                                         std::size_t capacity,
                                         const std::string& policy,
                                         std::size_t topk_k, int id_dim,
                                         std::uint64_t seed) {
  prop::PropagationConfig config;
  config.variant = cfg::variant_from_string(variant);
  config.temperature = temperature;
  config.stride = stride;
  config.memory.capacity = capacity;
  config.memory.kind = cfg::policy_from_string(policy);
  config.topk.enabled = topk_k > 0;
  config.topk.k = topk_k;
  config.id_dim = id_dim;
  config.seed = seed;
  return config;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "video object segmentation toolkit core";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<Error>(m, "ToolkitError", PyExc_RuntimeError);

  // --- attention ------------------------------------------------------------
  m.def("correlation", [](const py::array_t<double>& q,
                          const py::array_t<double>& k) {
    return array_from_matrix(
        attn::correlation(matrix_from_array(q), matrix_from_array(k)));
  });
  m.def("softmax_rows", [](const py::array_t<double>& scores) {
    return array_from_matrix(attn::softmax_rows(matrix_from_array(scores)));
  });
  m.def("attend", [](const py::array_t<double>& q, const py::array_t<double>& k,
                     const py::array_t<double>& v) {
    return array_from_matrix(attn::attend(
        matrix_from_array(q), matrix_from_array(k), matrix_from_array(v)));
  });
  m.def("attend_with_identity",
        [](const py::array_t<double>& q, const py::array_t<double>& k,
           const py::array_t<double>& v, const py::array_t<double>& e) {
          IdentityEmbedding identity{matrix_from_array(e)};
          return array_from_matrix(attn::attend_with_identity(
              matrix_from_array(q), matrix_from_array(k),
              matrix_from_array(v), identity));
        });
  m.def("attend_lstt_v2",
        [](const py::array_t<double>& q, const py::array_t<double>& k,
           const py::array_t<double>& v, const py::array_t<double>& e,
           const std::vector<double>& gate_weights,
           const py::array_t<double>& value_weights) {
          IdentityEmbedding identity{matrix_from_array(e)};
          LayerProjections proj;
          proj.gate_weights = gate_weights;
          proj.value_weights = matrix_from_array(value_weights);
          return array_from_matrix(attn::attend_lstt_v2(
              matrix_from_array(q), matrix_from_array(k),
              matrix_from_array(v), identity, proj));
        });
  m.def(
      "gradient_check",
      [](const std::string& op, const py::array_t<double>& q,
         const py::array_t<double>& k, const py::array_t<double>& v,
         const py::array_t<double>& e, const std::vector<double>& gate_weights,
         const py::array_t<double>& value_weights, double epsilon) {
        attn::AttentionInputs in;
        in.q = matrix_from_array(q);
        in.k = matrix_from_array(k);
        in.v = matrix_from_array(v);
        in.e.vectors = matrix_from_array(e);
        in.proj.gate_weights = gate_weights;
        in.proj.value_weights = matrix_from_array(value_weights);
        attn::GradCheckOp kind;
        if (op == "correlation") {
          kind = attn::GradCheckOp::kCorrelation;
        } else if (op == "eq1") {
          kind = attn::GradCheckOp::kDotProduct;
        } else if (op == "eq2") {
          kind = attn::GradCheckOp::kIdentityValue;
        } else if (op == "eq3") {
          kind = attn::GradCheckOp::kGatedIdentity;
        } else {
          throw ConfigError("gradient_check: unknown op " + op);
        }
        return attn::gradient_check(kind, in, epsilon);
      },
      py::arg("op"), py::arg("q"), py::arg("k"), py::arg("v"), py::arg("e"),
      py::arg("gate_weights"), py::arg("value_weights"),
      py::arg("epsilon") = 1e-5);
  m.def("topk_mask_scores",
        [](const py::array_t<double>& scores, std::size_t k) {
          return array_from_matrix(
              mem::topk_mask_scores(matrix_from_array(scores), k));
        });

  // --- propagation -----------------------------------------------------------
  m.def("encode_frame", [](const py::array_t<double>& frame) {
    const FeatureGrid grid = prop::encode_frame(frame_from_array(frame));
    py::array_t<double> array({static_cast<std::size_t>(grid.height),
                               static_cast<std::size_t>(grid.width),
                               static_cast<std::size_t>(grid.channels)});
    auto view = array.mutable_unchecked<3>();
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const auto f = grid.feature(x, y);
        for (int c = 0; c < grid.channels; ++c) view(y, x, c) = f[c];
      }
    }
    return array;
  });
  m.def(
      "propagate",
      [](const std::vector<py::array_t<double>>& frames,
         const py::array_t<std::uint8_t>& first_mask,
         const std::string& variant, double temperature, int stride,
         std::size_t capacity, const std::string& policy, std::size_t topk_k,
         int id_dim, std::uint64_t seed) {
        std::vector<Frame> cpp_frames;
        cpp_frames.reserve(frames.size());
        for (const auto& f : frames) cpp_frames.push_back(frame_from_array(f));
        const auto results = prop::propagate(
            cpp_frames, mask_from_array(first_mask),
            make_prop_config(variant, temperature, stride, capacity, policy,
                             topk_k, id_dim, seed));
        py::list masks, volumes;
        for (const auto& r : results) {
          masks.append(array_from_mask(r.mask));
          volumes.append(array_from_volume(r.volume));
        }
        py::dict out;
        out["masks"] = masks;
        out["volumes"] = volumes;
        return out;
      },
      py::arg("frames"), py::arg("first_mask"), py::arg("variant") = "eq2",
      py::arg("temperature") = 0.02, py::arg("stride") = 1,
      py::arg("capacity") = 2, py::arg("policy") = "keep-all",
      py::arg("topk_k") = 0, py::arg("id_dim") = 8,
      py::arg("seed") = 0x5eed);

  // --- fusion ----------------------------------------------------------------
  auto sets_from_lists =
      [](const std::vector<std::vector<py::array_t<double>>>& sources) {
        std::vector<fusion::PredictionSet> sets;
        for (std::size_t s = 0; s < sources.size(); ++s) {
          fusion::PredictionSet set;
          set.source_id = "source" + std::to_string(s);
          for (const auto& v : sources[s]) {
            set.volumes.push_back(volume_from_array(v));
          }
          sets.push_back(std::move(set));
        }
        return sets;
      };
  m.def("fuse_average",
        [sets_from_lists](
            const std::vector<std::vector<py::array_t<double>>>& sources) {
          py::list out;
          for (const auto& v : fusion::fuse_average(sets_from_lists(sources))) {
            out.append(array_from_volume(v));
          }
          return out;
        });
  m.def("fuse_max",
        [sets_from_lists](
            const std::vector<std::vector<py::array_t<double>>>& sources) {
          py::list out;
          for (const auto& v : fusion::fuse_max(sets_from_lists(sources))) {
            out.append(array_from_volume(v));
          }
          return out;
        });
  m.def("argmax_labels", [](const py::array_t<double>& volume) {
    return array_from_mask(argmax_labels(volume_from_array(volume)));
  });

  // --- metrics ----------------------------------------------------------------
  m.def("jaccard", [](const py::array_t<std::uint8_t>& pred,
                      const py::array_t<std::uint8_t>& gt, int object_id) {
    return metrics::jaccard(mask_from_array(pred), mask_from_array(gt),
                            static_cast<std::uint8_t>(object_id));
  });
  m.def("boundary_f",
        [](const py::array_t<std::uint8_t>& pred,
           const py::array_t<std::uint8_t>& gt, int object_id,
           double tolerance) {
          return metrics::boundary_f(mask_from_array(pred),
                                     mask_from_array(gt),
                                     static_cast<std::uint8_t>(object_id),
                                     tolerance);
        });
  m.def("overall_score", &metrics::overall_score);
  m.def(
      "evaluate_sequence",
      [](const std::vector<py::array_t<std::uint8_t>>& preds,
         const std::vector<py::array_t<std::uint8_t>>& gts,
         const std::vector<int>& seen, const std::vector<int>& unseen) {
        std::vector<LabelMask> p, g;
        for (const auto& m_ : preds) p.push_back(mask_from_array(m_));
        for (const auto& m_ : gts) g.push_back(mask_from_array(m_));
        metrics::EvalConfig eval;
        eval.seen_ids = seen;
        eval.unseen_ids = unseen;
        const metrics::ScoreReport report =
            metrics::evaluate_sequence(p, g, eval);
        py::dict out;
        py::dict per_object;
        for (const auto& [id, score] : report.per_object) {
          py::dict entry;
          entry["J"] = score.j;
          entry["F"] = score.f;
          entry["frames"] = score.frames_counted;
          per_object[py::int_(id)] = entry;
        }
        out["per_object"] = per_object;
        out["J_seen"] = report.j_seen;
        out["J_unseen"] = report.j_unseen;
        out["F_seen"] = report.f_seen;
        out["F_unseen"] = report.f_unseen;
        out["overall"] = report.overall;
        return out;
      },
      py::arg("preds"), py::arg("gts"),
      py::arg("seen") = std::vector<int>{},
      py::arg("unseen") = std::vector<int>{});

  // --- postprocess -------------------------------------------------------------
  m.def("small_object_select",
        [](const std::vector<py::array_t<std::uint8_t>>& masks,
           std::size_t threshold) {
          std::vector<LabelMask> cpp;
          for (const auto& m_ : masks) cpp.push_back(mask_from_array(m_));
          py::list out;
          for (const auto& r : post::small_object_select(cpp, threshold)) {
            out.append(py::make_tuple(r.object_id, r.first_frame,
                                      r.last_frame));
          }
          return out;
        });

  // --- synthetic + io ------------------------------------------------------------
  m.def("gen_synthetic", [](const std::string& spec_json) {
    const auto clip = synth::gen_synthetic(synth::spec_from_json(spec_json));
    py::list frames, masks;
    for (const auto& f : clip.frames) frames.append(array_from_frame(f));
    for (const auto& m_ : clip.masks) masks.append(array_from_mask(m_));
    py::dict out;
    out["frames"] = frames;
    out["masks"] = masks;
    return out;
  });
  m.def("standard_suite_specs", []() {
    py::dict out;
    for (const auto& named : synth::standard_suite()) {
      out[py::str(named.name)] = synth::spec_to_json(named.spec);
    }
    return out;
  });
  m.def("write_mask", [](const std::string& path,
                         const py::array_t<std::uint8_t>& mask) {
    io::write_mask(path, mask_from_array(mask));
  });
  m.def("read_mask", [](const std::string& path) {
    return array_from_mask(io::read_mask(path));
  });
  m.def("write_volume", [](const std::string& path,
                           const py::array_t<double>& volume) {
    io::write_volume(path, volume_from_array(volume));
  });
  m.def("read_volume", [](const std::string& path) {
    return array_from_volume(io::read_volume(path));
  });
}
