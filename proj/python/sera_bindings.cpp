#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sera/bootstrap.hpp"
#include "sera/daa_losses.hpp"
#include "sera/errors.hpp"
#include "sera/eval.hpp"
#include "sera/experiments.hpp"
#include "sera/policy.hpp"
#include "sera/selection.hpp"
#include "sera/synthdata.hpp"
#include "sera/trainer.hpp"

namespace py = pybind11;
using namespace sera;

namespace {

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) throw PreconditionError("ragged logit rows");
    for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tabular preference-optimization laboratory";

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<EmptyResultError>(m, "EmptyResultError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Vocab>(m, "Vocab")
      .def(py::init<int>(), py::arg("size"))
      .def_readonly("size", &Vocab::size)
      .def_property_readonly("bos", &Vocab::bos)
      .def_property_readonly("eos", &Vocab::eos)
      .def("__eq__", [](const Vocab& a, const Vocab& b) { return a == b; });

  py::class_<TabularPolicy>(m, "TabularPolicy")
      .def(py::init([](const Vocab& v, const std::vector<std::vector<double>>& logits) {
             return TabularPolicy(v, to_matrix(logits));
           }),
           py::arg("vocab"), py::arg("logits"))
      .def_static("uniform", &TabularPolicy::uniform, py::arg("vocab"))
      .def_property_readonly("vocab", &TabularPolicy::vocab)
      .def_property_readonly("logits", [](const TabularPolicy& p) { return to_rows(p.logits()); })
      .def("log_prob_next", &TabularPolicy::log_prob_next, py::arg("context"), py::arg("next"))
      .def("__eq__", [](const TabularPolicy& a, const TabularPolicy& b) { return a == b; });

  py::class_<SampleControls>(m, "SampleControls")
      .def(py::init([](double temperature, double top_p, int max_len, std::uint64_t seed) {
             return SampleControls{temperature, top_p, max_len, seed};
           }),
           py::arg("temperature") = 0.7, py::arg("top_p") = 0.95, py::arg("max_len") = 6,
           py::arg("seed") = 0)
      .def_readwrite("temperature", &SampleControls::temperature)
      .def_readwrite("top_p", &SampleControls::top_p)
      .def_readwrite("max_len", &SampleControls::max_len)
      .def_readwrite("seed", &SampleControls::seed);

  m.def("log_prob", &log_prob, py::arg("policy"), py::arg("prompt"), py::arg("response"));
  m.def("log_prob_grad",
        [](const TabularPolicy& p, const TokenSeq& x, const TokenSeq& y) { return to_rows(log_prob_grad(p, x, y)); },
        py::arg("policy"), py::arg("prompt"), py::arg("response"));
  m.def("sample", py::overload_cast<const TabularPolicy&, const TokenSeq&, const SampleControls&>(&sample),
        py::arg("policy"), py::arg("prompt"), py::arg("controls"));
  m.def("nucleus_distribution",
        [](const std::vector<double>& logits, double t, double p) { return nucleus_distribution(logits, t, p); },
        py::arg("logits"), py::arg("temperature"), py::arg("top_p"));
  m.def("fit_sft",
        [](const Vocab& v, const std::vector<std::pair<TokenSeq, TokenSeq>>& corpus, int epochs, double lr) {
          std::vector<SftExample> ex;
          for (const auto& [x, y] : corpus) ex.push_back({x, y});
          return fit_sft(v, ex, epochs, lr);
        },
        py::arg("vocab"), py::arg("corpus"), py::arg("epochs"), py::arg("lr"));
  m.def("save_policy", &save_policy, py::arg("path"), py::arg("policy"));
  m.def("load_policy", &load_policy, py::arg("path"));

  py::class_<PreferencePair>(m, "PreferencePair")
      .def(py::init([](TokenSeq x, TokenSeq c, TokenSeq r, std::uint64_t id) {
             return PreferencePair{std::move(x), std::move(c), std::move(r), id};
           }),
           py::arg("prompt"), py::arg("chosen"), py::arg("rejected"), py::arg("id") = 0)
      .def_readwrite("prompt", &PreferencePair::prompt)
      .def_readwrite("chosen", &PreferencePair::chosen)
      .def_readwrite("rejected", &PreferencePair::rejected)
      .def_readwrite("id", &PreferencePair::id)
      .def("__eq__", [](const PreferencePair& a, const PreferencePair& b) { return a == b; });

  py::enum_<LossVariant>(m, "LossVariant")
      .value("DPO", LossVariant::Dpo)
      .value("IPO", LossVariant::Ipo)
      .value("SLIC", LossVariant::Slic)
      .value("SIMPO", LossVariant::Simpo);
  m.def("parse_loss_variant", [](const std::string& s) { return parse_loss_variant(s); }, py::arg("name"));
  m.def("default_beta", &default_beta, py::arg("variant"));

  py::class_<LossKind>(m, "LossKind")
      .def(py::init([](LossVariant v, double beta) { return LossKind{v, beta}; }), py::arg("variant"),
           py::arg("beta"))
      .def_readwrite("variant", &LossKind::variant)
      .def_readwrite("beta", &LossKind::beta);

  m.def("implicit_reward", &implicit_reward, py::arg("policy"), py::arg("reference"), py::arg("prompt"),
        py::arg("response"));
  m.def("simpo_reward", &simpo_reward, py::arg("policy"), py::arg("prompt"), py::arg("response"),
        py::arg("beta"));
  m.def("irm", &irm, py::arg("policy"), py::arg("reference"), py::arg("pair"));
  m.def("preference_prob", &preference_prob, py::arg("margin"), py::arg("beta"));
  m.def("loss", &loss, py::arg("kind"), py::arg("margin"));
  m.def("loss_grad",
        [](const LossKind& k, const TabularPolicy& p, const TabularPolicy& r, const PreferencePair& pair) {
          return to_rows(loss_grad(k, p, r, pair));
        },
        py::arg("kind"), py::arg("policy"), py::arg("reference"), py::arg("pair"));

  py::class_<MarginRecord>(m, "MarginRecord")
      .def(py::init([](std::uint64_t id, double margin) { return MarginRecord{id, margin, margin, 0.0}; }),
           py::arg("pair_id"), py::arg("margin"))
      .def_readonly("pair_id", &MarginRecord::pair_id)
      .def_readonly("margin", &MarginRecord::margin)
      .def_readonly("reward_chosen", &MarginRecord::reward_chosen)
      .def_readonly("reward_rejected", &MarginRecord::reward_rejected);

  m.def("ensemble_reward",
        [](const std::vector<TabularPolicy>& snaps, int t, double gamma, const TokenSeq& x, const TokenSeq& y) {
          if (snaps.empty()) throw PreconditionError("history needs at least one snapshot");
          PolicyHistory h(snaps.front());
          for (std::size_t i = 1; i < snaps.size(); ++i) h.push(snaps[i]);
          return ensemble_reward(h, t, gamma, x, y);
        },
        py::arg("history"), py::arg("t"), py::arg("gamma"), py::arg("prompt"), py::arg("response"));
  m.def("select_top_k",
        [](const std::vector<MarginRecord>& recs, std::size_t k) { return select_top_k(recs, k); },
        py::arg("records"), py::arg("k"));
  m.def("jaccard", &jaccard, py::arg("a"), py::arg("b"));
  m.def("proportion_to_count", &proportion_to_count, py::arg("proportion"), py::arg("n"));

  py::class_<SyntheticWorld>(m, "SyntheticWorld")
      .def_readonly("gold", &SyntheticWorld::gold)
      .def_readonly("prompt_len", &SyntheticWorld::prompt_len)
      .def_readonly("response_len_max", &SyntheticWorld::response_len_max)
      .def_property_readonly("vocab", &SyntheticWorld::vocab)
      .def("gold_reward", &SyntheticWorld::gold_reward, py::arg("prompt"), py::arg("response"))
      .def("true_preference", &SyntheticWorld::true_preference, py::arg("prompt"), py::arg("a"), py::arg("b"));
  m.def("make_world", &make_world, py::arg("vocab_size"), py::arg("sharpness"), py::arg("seed"),
        py::arg("prompt_len") = 2, py::arg("response_len_max") = 6, py::arg("eos_bias") = 0.0);

  py::class_<LabelPolicy>(m, "LabelPolicy")
      .def(py::init([](double flip, double length, bool stochastic) { return LabelPolicy{flip, length, stochastic}; }),
           py::arg("flip_rate") = 0.0, py::arg("length_bias_rate") = 0.0, py::arg("stochastic_labels") = false);

  py::class_<AuditFlags>(m, "AuditFlags")
      .def_readonly("id", &AuditFlags::id)
      .def_readonly("was_flipped", &AuditFlags::was_flipped)
      .def_readonly("was_length_labeled", &AuditFlags::was_length_labeled)
      .def_readonly("gold_chosen", &AuditFlags::gold_chosen)
      .def_readonly("gold_rejected", &AuditFlags::gold_rejected);

  py::class_<GeneratedDataset>(m, "GeneratedDataset")
      .def_readonly("pairs", &GeneratedDataset::pairs)
      .def_readonly("audit", &GeneratedDataset::audit);
  m.def("gen_dataset", &gen_dataset, py::arg("world"), py::arg("behavior"), py::arg("n_pairs"),
        py::arg("label"), py::arg("controls"));
  m.def("write_jsonl",
        [](const std::filesystem::path& p, const std::vector<PreferencePair>& pairs) { write_jsonl(p, pairs); },
        py::arg("path"), py::arg("pairs"));
  m.def("read_jsonl", &read_jsonl, py::arg("path"));

  py::class_<SeraConfig>(m, "SeraConfig")
      .def_static("defaults", &SeraConfig::defaults, py::arg("variant"), py::arg("n_offline"))
      .def_readwrite("loss", &SeraConfig::loss)
      .def_readwrite("iterations", &SeraConfig::iterations)
      .def_readwrite("gamma", &SeraConfig::gamma)
      .def_readwrite("k", &SeraConfig::k)
      .def_readwrite("k_tilde", &SeraConfig::k_tilde)
      .def_readwrite("epochs_per_iter", &SeraConfig::epochs_per_iter)
      .def_readwrite("lr", &SeraConfig::lr)
      .def_readwrite("batch", &SeraConfig::batch)
      .def_readwrite("seed", &SeraConfig::seed)
      .def_property(
          "r_candidates", [](const SeraConfig& c) { return c.bootstrap.r_candidates; },
          [](SeraConfig& c, int r) { c.bootstrap.r_candidates = r; })
      .def_property(
          "sample_controls", [](const SeraConfig& c) { return c.bootstrap.controls; },
          [](SeraConfig& c, const SampleControls& s) { c.bootstrap.controls = s; });

  py::class_<IterationReport>(m, "IterationReport")
      .def_readonly("t", &IterationReport::t)
      .def_readonly("dataset_size", &IterationReport::dataset_size)
      .def_readonly("offline_kept", &IterationReport::offline_kept)
      .def_readonly("bootstrapped_kept", &IterationReport::bootstrapped_kept)
      .def_readonly("mean_loss_start", &IterationReport::mean_loss_start)
      .def_readonly("mean_loss_end", &IterationReport::mean_loss_end)
      .def_readonly("optimizer_steps", &IterationReport::optimizer_steps)
      .def_readonly("loss_increased", &IterationReport::loss_increased)
      .def_readonly("selected_ids", &IterationReport::selected_ids);

  py::class_<SeraRun>(m, "SeraRun")
      .def_property_readonly("history",
                             [](const SeraRun& r) {
                               return std::vector<TabularPolicy>(r.history.snapshots().begin(),
                                                                 r.history.snapshots().end());
                             })
      .def_readonly("reports", &SeraRun::reports)
      .def_readonly("margins", &SeraRun::margins);
  m.def("run_sera",
        [](const TabularPolicy& sft, const std::vector<PreferencePair>& offline,
           const std::vector<TokenSeq>& prompts, const SeraConfig& cfg) {
          py::gil_scoped_release release;
          return run_sera(sft, offline, prompts, cfg);
        },
        py::arg("sft"), py::arg("offline"), py::arg("prompts"), py::arg("config"));

  py::class_<WinRateResult>(m, "WinRateResult")
      .def_readonly("wins", &WinRateResult::wins)
      .def_readonly("ties", &WinRateResult::ties)
      .def_readonly("losses", &WinRateResult::losses)
      .def_readonly("score", &WinRateResult::score);
  m.def("win_rate",
        [](const SyntheticWorld& w, const TabularPolicy& a, const TabularPolicy& b,
           const std::vector<TokenSeq>& prompts, const SampleControls& c) { return win_rate(w, a, b, prompts, c); },
        py::arg("world"), py::arg("a"), py::arg("b"), py::arg("prompts"), py::arg("controls"));
  m.def("gen_prompts", &gen_prompts, py::arg("world"), py::arg("n"), py::arg("seed"));
}
