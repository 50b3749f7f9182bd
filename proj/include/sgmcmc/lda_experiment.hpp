#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sgmcmc/config.hpp"
#include "sgmcmc/experiment_common.hpp"
#include "sgmcmc/lda.hpp"

namespace sgmcmc {

struct LdaSeries {
    std::string preset;
    int chain = 0;
    std::vector<long long> docs_processed;
    std::vector<double> perplexity;
    bool diverged = false;
};

struct LdaResult {
    std::vector<LdaSeries> series;
    bool any_divergence = false;
};

namespace detail {

struct LdaSampler {
    SamplerSetup setup;
    lda::LdaConfig lda_config;
};

inline LdaSampler make_lda_sampler(const std::string& name, const ConfigMap& cfg, int topics,
                                   int vocab) {
    // all presets share the desk-scale prior by default: the tiny Gamma shape
    // used at web scale freezes coordinates of the multiplicative dynamics on
    // a 500-document corpus (see README for the web-scale values)
    const bool riemannian = (name == "sgrld" || name == "sgrhmc");
    lda::LdaConfig lc;
    lc.topics = topics;
    lc.vocab = vocab;
    lc.alpha = riemannian ? cfg.get_double("lda.alpha_riemann", cfg.get_double("lda.alpha", 0.01))
                          : cfg.get_double("lda.alpha", 0.01);
    lc.gamma = riemannian ? cfg.get_double("lda.gamma_riemann", cfg.get_double("lda.gamma", 0.1))
                          : cfg.get_double("lda.gamma", 0.1);
    lc.minibatch_docs = static_cast<std::size_t>(cfg.get_int("lda.minibatch_docs", 50));
    lc.gibbs_burnin = static_cast<int>(cfg.get_int("lda.gibbs_burnin", 2));
    lc.gibbs_sweeps = static_cast<int>(cfg.get_int("lda.gibbs_sweeps", 4));

    const Eigen::Index d = static_cast<Eigen::Index>(topics) * vocab;
    BlockLayout layout(d);
    // the potential itself is never evaluated by these presets; gradients come
    // from the corpus estimator
    EnergyModel placeholder(
        layout, [](const Vector&) { return 0.0; },
        [d](const Vector&) { return Vector::Zero(d); });

    const std::string prefix = "preset." + name;
    PresetConfig pc;
    LdaSampler out;
    if (name == "sgld") {
        // additive noise on the positive weights: very small steps keep the
        // reflected boundary layer below the topic structure
        pc.schedule = schedule_from_config(cfg, prefix, 1e-4);
        out.setup = make_sgld(pc, placeholder);
    } else if (name == "sghmc") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.1);
        if (cfg.has(prefix + ".resample_period"))
            pc.resample_period = cfg.get_int(prefix + ".resample_period", 50);
        out.setup = make_sghmc(pc, placeholder);
    } else if (name == "sgrld") {
        pc.schedule = schedule_from_config(cfg, prefix, 0.01);
        pc.metric = MetricSpec::fisher_diagonal();
        out.setup = make_sgrld(pc, placeholder);
    } else if (name == "sgrhmc") {
        // the coordinate metric makes the momentum friction eps * theta_kw:
        // stability wants small eps, exploration wants long trajectories
        pc.schedule = schedule_from_config(cfg, prefix, 0.002);
        pc.resample_period = cfg.get_int(prefix + ".resample_period", 1000);
        pc.metric = MetricSpec::fisher_diagonal();
        out.setup = make_gsgrhmc(pc, placeholder);
    } else {
        throw config_error("lda: unknown preset " + name);
    }
    out.setup.post_step = make_reflect_positive_hook();
    out.lda_config = lc;
    return out;
}

}  // namespace detail

// Streaming topic-model run: minibatches of documents drive each preset's
// chain over the flattened topic-word weights; document-completion perplexity
// is logged against documents processed.
inline LdaResult run_lda(ConfigMap cfg, const std::string& out_dir) {
    static const std::set<std::string> fixed = {
        "run.seed",          "run.n_chains",     "run.presets",      "lda.corpus",
        "lda.vocab",         "lda.topics",       "lda.synthetic_docs", "lda.heldout_docs",
        "lda.doc_length",    "lda.corpus_seed",  "lda.minibatch_docs", "lda.batches",
        "lda.perplexity_every", "lda.alpha",     "lda.gamma",        "lda.alpha_riemann",
        "lda.gamma_riemann", "lda.gibbs_burnin", "lda.gibbs_sweeps"};
    static const std::set<std::string> preset_names = {"sgld", "sghmc", "sgrld", "sgrhmc"};
    detail::require_known_with_presets(cfg, fixed, preset_names);

    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
    const int n_chains = static_cast<int>(cfg.get_int("run.n_chains", 3));
    const int topics = static_cast<int>(cfg.get_int("lda.topics", 5));
    const int vocab = static_cast<int>(cfg.get_int("lda.vocab", 100));
    const long long batches = cfg.get_int("lda.batches", 200);
    const long long perplexity_every = cfg.get_int("lda.perplexity_every", 5);
    const std::vector<std::string> presets =
        cfg.get_list("run.presets", {"sgld", "sghmc", "sgrld", "sgrhmc"});
    for (const std::string& p : presets)
        if (!preset_names.count(p)) throw config_error("lda: preset " + p + " is not available");

    detail::ensure_out_dir(out_dir);
    detail::write_echo(cfg, out_dir);

    // corpus: user-provided bag-of-words file, or the synthetic generator
    lda::DocumentBatch train, heldout;
    if (cfg.has("lda.corpus")) {
        train = lda::ingest_documents(cfg.get_string("lda.corpus", ""), vocab);
        // hold out the tail tenth for perplexity
        std::size_t cut = train.size() - train.size() / 10;
        for (std::size_t i = cut; i < train.size(); ++i) {
            heldout.docs.push_back(train.docs[i]);
            heldout.ids.push_back(train.ids[i]);
        }
        train.docs.resize(cut);
        train.ids.resize(cut);
    } else {
        Rng corpus_rng = make_rng(static_cast<std::uint64_t>(cfg.get_int("lda.corpus_seed", 9999)));
        lda::SyntheticCorpus corpus = lda::generate_synthetic_corpus(
            topics, vocab, static_cast<int>(cfg.get_int("lda.synthetic_docs", 500)),
            static_cast<int>(cfg.get_int("lda.heldout_docs", 50)),
            static_cast<int>(cfg.get_int("lda.doc_length", 50)),
            0.3, corpus_rng);
        train = std::move(corpus.train);
        heldout = std::move(corpus.heldout);
        lda::write_corpus(train, (std::filesystem::path(out_dir) / "corpus.txt").string());
        lda::write_corpus(heldout, (std::filesystem::path(out_dir) / "heldout.txt").string());
        lda::write_vocabulary((std::filesystem::path(out_dir) / "vocab.tsv").string(), vocab);
    }

    LdaResult result;
    const Eigen::Index d = static_cast<Eigen::Index>(topics) * vocab;

    for (const std::string& preset : presets) {
        for (int chain = 0; chain < n_chains; ++chain) {
            LdaSeries series;
            series.preset = preset;
            series.chain = chain;

            std::ofstream log(std::filesystem::path(out_dir) /
                              ("perplexity_" + preset + "_chain" + std::to_string(chain) +
                               ".csv"));
            log << "docs_processed,perplexity\n";

            if (train.size() == 0) {  // nothing to stream; header-only log
                result.series.push_back(std::move(series));
                continue;
            }

            detail::LdaSampler sampler = detail::make_lda_sampler(preset, cfg, topics, vocab);
            if (sampler.lda_config.minibatch_docs > train.size())
                throw config_error("lda: minibatch larger than the corpus");
            GradientEstimator est =
                lda::make_lda_gradient_estimator(train, sampler.lda_config);

            Rng rng = make_rng(seed + static_cast<std::uint64_t>(chain));
            // random positive topic weights (symmetric weights stall the
            // topic-separation transient), auxiliary blocks at rest
            Vector init = Vector::Zero(sampler.setup.spec.model.layout().dim());
            std::gamma_distribution<double> unit_gamma(1.0, 1.0);
            for (Eigen::Index i = 0; i < d; ++i) init[i] = std::max(unit_gamma(rng), 1e-4);
            StateVector z(sampler.setup.spec.model.layout(), std::move(init));

            for (long long t = 0; t < batches; ++t) {
                if (sampler.setup.resample_period > 0 && t > 0 &&
                    t % sampler.setup.resample_period == 0 &&
                    sampler.setup.spec.model.layout().has_r())
                    detail::resample_momentum(z, sampler.setup.spec.model.mass(), rng);

                try {
                    GradientEstimate e = est(Vector(z.theta()), rng);
                    Vector grad_h =
                        sampler.setup.spec.model.grad_with_potential_grad(z, e.grad);
                    z = step_minibatch(sampler.setup.spec, z, t, grad_h, rng, e.value);
                } catch (const numeric_error&) {
                    series.diverged = true;
                }
                if (!series.diverged) {
                    sampler.setup.post_step(z);
                    if (!z.finite()) series.diverged = true;
                }
                if (series.diverged) {
                    result.any_divergence = true;
                    break;
                }

                if (t == 0 || t == batches - 1 || (t + 1) % perplexity_every == 0) {
                    lda::ThetaMatrix theta(topics, vocab, Vector(z.theta()));
                    Rng perp_rng = split_rng(seed + static_cast<std::uint64_t>(chain),
                                             1000 + static_cast<std::uint64_t>(t));
                    lda::PerplexityResult perp =
                        lda::perplexity(theta, heldout, sampler.lda_config, perp_rng);
                    long long docs = (t + 1) * static_cast<long long>(
                                                   sampler.lda_config.minibatch_docs);
                    series.docs_processed.push_back(docs);
                    series.perplexity.push_back(perp.value);
                    log << docs << "," << format_double(perp.value) << "\n";
                }
            }
            result.series.push_back(std::move(series));
        }
    }
    return result;
}

}  // namespace sgmcmc
