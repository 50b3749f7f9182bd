#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sgmcmc/chain.hpp"
#include "sgmcmc/metric.hpp"
#include "sgmcmc/minibatch.hpp"

namespace sgmcmc::lda {

// Topic model over an unconstrained positive parameterization: each topic k
// holds positive weights theta_kw with word probabilities
// beta_kw = theta_kw / sum_w theta_kw, and a Gamma(alpha, 1) prior per entry.
// Document topic proportions carry a symmetric Dirichlet(gamma) prior and are
// handled through per-document Gibbs expectations of the token assignments.
struct LdaConfig {
    int topics = 5;                 // K
    int vocab = 100;                // W
    double alpha = 0.01;            // Gamma shape of the per-entry prior
    double gamma = 0.1;             // per-document Dirichlet parameter
    std::size_t minibatch_docs = 50;
    int gibbs_burnin = 2;
    int gibbs_sweeps = 4;           // averaging sweeps after burn-in
    std::size_t corpus_size = 0;    // |S|; set from the corpus when loading

    void check() const {
        if (topics < 1 || vocab < 1 || minibatch_docs < 1)
            throw config_error("lda: topics, vocab and minibatch size must be at least 1");
        if (!(alpha > 0.0) || !(gamma > 0.0))
            throw config_error("lda: alpha and gamma must be positive");
        if (gibbs_sweeps < 1) throw config_error("lda: need at least one averaging sweep");
    }
};

struct Document {
    std::vector<std::pair<int, int>> counts;  // (word id, count), sorted by word id
    int total = 0;
};

struct DocumentBatch {
    std::vector<Document> docs;
    std::vector<long long> ids;

    std::size_t size() const { return docs.size(); }
};

// K x W positive matrix; the sampler state is its row-major flattening.
struct ThetaMatrix {
    int topics = 0;
    int vocab = 0;
    Vector values;  // size K * W, index k * W + w

    ThetaMatrix() = default;
    ThetaMatrix(int k, int w) : topics(k), vocab(w), values(Vector::Zero(k * w)) {}
    ThetaMatrix(int k, int w, Vector flat) : topics(k), vocab(w), values(std::move(flat)) {
        if (values.size() != static_cast<Eigen::Index>(k) * w)
            throw dimension_error("ThetaMatrix: flat size does not match shape");
    }

    double at(int k, int w) const { return values[static_cast<Eigen::Index>(k) * vocab + w]; }
    double& at(int k, int w) { return values[static_cast<Eigen::Index>(k) * vocab + w]; }

    Vector row_sums() const {
        Vector s = Vector::Zero(topics);
        for (int k = 0; k < topics; ++k)
            s[k] = values.segment(static_cast<Eigen::Index>(k) * vocab, vocab).sum();
        return s;
    }

    // beta_kw = theta_kw / theta_k.
    Matrix word_distributions() const {
        Matrix beta(topics, vocab);
        Vector sums = row_sums();
        for (int k = 0; k < topics; ++k)
            for (int w = 0; w < vocab; ++w) beta(k, w) = at(k, w) / sums[k];
        return beta;
    }
};

// |theta| with exact zeros nudged off the boundary.
inline void reflect_positive(ThetaMatrix& theta) {
    for (Eigen::Index i = 0; i < theta.values.size(); ++i) {
        double x = std::abs(theta.values[i]);
        theta.values[i] = x == 0.0 ? 1e-10 : x;
    }
}

// Diagonal Fisher-information metric of the expanded parameterization:
// G = diag(theta)^{-1}, so G^{-1} = diag(theta), G^{-1/2} = diag(sqrt(theta)),
// d(G^{-1/2})_ii/d theta_i = 1/(2 sqrt(theta_i)); the first-order drift
// correction d(G^{-1})_ii/d theta_i is identically one.
inline MetricEval riemannian_metric(const Vector& theta) {
    for (Eigen::Index i = 0; i < theta.size(); ++i)
        if (!(theta[i] > 0.0))
            throw domain_error("riemannian_metric: theta must be positive (component " +
                               std::to_string(i) + ")");
    MetricEval m;
    m.g_inv = theta;
    m.g_inv_sqrt = theta.cwiseSqrt();
    m.g_inv_deriv = Vector::Ones(theta.size());
    m.g_inv_sqrt_deriv = (0.5 * m.g_inv_sqrt.cwiseInverse()).eval();
    return m;
}

// --- per-document Gibbs ------------------------------------------------------

struct TopicExpectations {
    // E[n_kw] over the document's distinct words, and E[n_k.]
    // counts(k, u) indexes distinct word u in the document's count order.
    Matrix counts;
    Vector margins;
};

// Collapsed conditional for one token: p(z = k | rest) proportional to
// (gamma + n_k^{\j}) * theta_{k, w} / theta_{k, .} — the word probability is
// the row-normalized weight, so a topic's overall scale carries no vote.
inline TopicExpectations gibbs_topic_expectations(const ThetaMatrix& theta, const Document& doc,
                                                  double gamma, int sweeps, int burnin,
                                                  Rng& rng) {
    if (doc.total < 1) throw config_error("gibbs_topic_expectations: empty document");
    if (sweeps < 1) throw config_error("gibbs_topic_expectations: need at least one sweep");
    const int k_topics = theta.topics;
    const Vector row_sums = theta.row_sums();

    // token expansion in count order
    std::vector<int> token_word;  // distinct-word index per token
    token_word.reserve(static_cast<std::size_t>(doc.total));
    for (std::size_t u = 0; u < doc.counts.size(); ++u)
        for (int c = 0; c < doc.counts[u].second; ++c) token_word.push_back(static_cast<int>(u));

    std::vector<int> assign(token_word.size(), 0);
    std::vector<double> margin_counts(static_cast<std::size_t>(k_topics), 0.0);
    Matrix word_counts = Matrix::Zero(k_topics, static_cast<Eigen::Index>(doc.counts.size()));

    std::vector<double> probs(static_cast<std::size_t>(k_topics));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw_topic = [&](int word_u) {
        const int w = doc.counts[static_cast<std::size_t>(word_u)].first;
        double norm = 0.0;
        for (int k = 0; k < k_topics; ++k) {
            probs[static_cast<std::size_t>(k)] =
                (gamma + margin_counts[static_cast<std::size_t>(k)]) * theta.at(k, w) /
                row_sums[k];
            norm += probs[static_cast<std::size_t>(k)];
        }
        if (!(norm > 0.0))
            throw numeric_error("gibbs_topic_expectations: zero conditional normalizer");
        double u = unif(rng) * norm;
        double acc = 0.0;
        for (int k = 0; k < k_topics; ++k) {
            acc += probs[static_cast<std::size_t>(k)];
            if (u <= acc) return k;
        }
        return k_topics - 1;
    };

    // incremental initialization
    for (std::size_t j = 0; j < token_word.size(); ++j) {
        int k = draw_topic(token_word[j]);
        assign[j] = k;
        margin_counts[static_cast<std::size_t>(k)] += 1.0;
        word_counts(k, token_word[j]) += 1.0;
    }

    TopicExpectations out;
    out.counts = Matrix::Zero(k_topics, static_cast<Eigen::Index>(doc.counts.size()));
    out.margins = Vector::Zero(k_topics);

    for (int sweep = 0; sweep < burnin + sweeps; ++sweep) {
        for (std::size_t j = 0; j < token_word.size(); ++j) {
            int old_k = assign[j];
            margin_counts[static_cast<std::size_t>(old_k)] -= 1.0;
            word_counts(old_k, token_word[j]) -= 1.0;
            int k = draw_topic(token_word[j]);
            assign[j] = k;
            margin_counts[static_cast<std::size_t>(k)] += 1.0;
            word_counts(k, token_word[j]) += 1.0;
        }
        if (sweep >= burnin) {
            out.counts += word_counts;
            for (int k = 0; k < k_topics; ++k) out.margins[k] += margin_counts[static_cast<std::size_t>(k)];
        }
    }
    out.counts /= static_cast<double>(sweeps);
    out.margins /= static_cast<double>(sweeps);
    return out;
}

// --- stochastic gradient ------------------------------------------------------

// Gradient of the log posterior in expanded-mean coordinates,
//   (alpha-1)/theta_kw - 1 + scale * sum_d E[ n_dkw/theta_kw - n_dk./theta_k. ],
// returned negated: the potential-gradient convention the samplers consume.
inline Vector stochastic_grad(const ThetaMatrix& theta, const DocumentBatch& batch,
                              const LdaConfig& config, double scale, Rng& rng) {
    config.check();
    for (Eigen::Index i = 0; i < theta.values.size(); ++i)
        if (!(theta.values[i] > 0.0))
            throw domain_error("lda stochastic_grad: theta must be positive; apply reflection");

    const int k_topics = theta.topics;
    const int vocab = theta.vocab;
    Vector row_sums = theta.row_sums();

    Vector grad_log_post(theta.values.size());
    for (Eigen::Index i = 0; i < theta.values.size(); ++i)
        grad_log_post[i] = (config.alpha - 1.0) / theta.values[i] - 1.0;

    for (const Document& doc : batch.docs) {
        TopicExpectations e = gibbs_topic_expectations(theta, doc, config.gamma,
                                                       config.gibbs_sweeps, config.gibbs_burnin,
                                                       rng);
        for (int k = 0; k < k_topics; ++k) {
            for (std::size_t u = 0; u < doc.counts.size(); ++u) {
                const int w = doc.counts[u].first;
                grad_log_post[static_cast<Eigen::Index>(k) * vocab + w] +=
                    scale * e.counts(k, static_cast<Eigen::Index>(u)) / theta.at(k, w);
            }
            const double margin_term = scale * e.margins[k] / row_sums[k];
            for (int w = 0; w < vocab; ++w)
                grad_log_post[static_cast<Eigen::Index>(k) * vocab + w] -= margin_term;
        }
    }
    return -grad_log_post;
}

// --- corpus I/O -----------------------------------------------------------------

// Bag-of-words line format: `doc_id word_id:count ...`
inline DocumentBatch ingest_documents(std::istream& in, int vocab) {
    DocumentBatch batch;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        long long doc_id;
        if (!(row >> doc_id))
            throw parse_error("corpus parse error at line " + std::to_string(line_no));
        Document doc;
        std::string tok;
        std::map<int, int> counts;
        while (row >> tok) {
            std::size_t colon = tok.find(':');
            if (colon == std::string::npos)
                throw parse_error("corpus parse error at line " + std::to_string(line_no) +
                                  ": expected word_id:count");
            int w, c;
            try {
                w = std::stoi(tok.substr(0, colon));
                c = std::stoi(tok.substr(colon + 1));
            } catch (const std::exception&) {
                throw parse_error("corpus parse error at line " + std::to_string(line_no));
            }
            if (w < 0 || w >= vocab)
                throw parse_error("out-of-vocabulary word id " + std::to_string(w) + " at line " +
                                  std::to_string(line_no));
            if (c < 1)
                throw parse_error("non-positive count at line " + std::to_string(line_no));
            counts[w] += c;
        }
        for (const auto& [w, c] : counts) {
            doc.counts.emplace_back(w, c);
            doc.total += c;
        }
        batch.docs.push_back(std::move(doc));
        batch.ids.push_back(doc_id);
    }
    return batch;
}

inline DocumentBatch ingest_documents(const std::string& path, int vocab) {
    std::ifstream in(path);
    if (!in) throw config_error("corpus file not found: " + path);
    return ingest_documents(in, vocab);
}

inline void write_corpus(const DocumentBatch& batch, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open corpus file for writing: " + path);
    for (std::size_t d = 0; d < batch.docs.size(); ++d) {
        out << batch.ids[d];
        for (const auto& [w, c] : batch.docs[d].counts) out << " " << w << ":" << c;
        out << "\n";
    }
}

// Vocabulary file: `word_id<TAB>token`
inline void write_vocabulary(const std::string& path, int vocab) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot open vocabulary file for writing: " + path);
    for (int w = 0; w < vocab; ++w) out << w << "\t" << "w" << w << "\n";
}

inline std::vector<std::string> read_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("vocabulary file not found: " + path);
    std::vector<std::string> tokens;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw parse_error("vocabulary parse error at line " + std::to_string(line_no));
        tokens.push_back(line.substr(tab + 1));
    }
    return tokens;
}

// --- synthetic corpus -------------------------------------------------------------

struct SyntheticCorpus {
    DocumentBatch train;
    DocumentBatch heldout;
    Matrix beta_true;  // K x W
};

// Block-structured topics with Dirichlet weights inside each block, documents
// drawn from the usual mixture process.
inline SyntheticCorpus generate_synthetic_corpus(int topics, int vocab, int n_train,
                                                 int n_heldout, int doc_length,
                                                 double topic_concentration, Rng& rng) {
    if (vocab % topics != 0)
        throw config_error("synthetic corpus: vocab must be a multiple of the topic count");
    SyntheticCorpus corpus;
    corpus.beta_true = Matrix::Zero(topics, vocab);
    std::gamma_distribution<double> block_gamma(1.0, 1.0);
    const int block = vocab / topics;
    for (int k = 0; k < topics; ++k) {
        double sum = 0.0;
        for (int w = k * block; w < (k + 1) * block; ++w) {
            corpus.beta_true(k, w) = block_gamma(rng);
            sum += corpus.beta_true(k, w);
        }
        for (int w = k * block; w < (k + 1) * block; ++w) corpus.beta_true(k, w) /= sum;
    }

    std::gamma_distribution<double> prop_gamma(topic_concentration, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw_doc = [&]() {
        Vector pi(topics);
        double sum = 0.0;
        for (int k = 0; k < topics; ++k) {
            pi[k] = prop_gamma(rng);
            sum += pi[k];
        }
        pi /= sum;
        std::map<int, int> counts;
        for (int j = 0; j < doc_length; ++j) {
            double u = unif(rng);
            int k = 0;
            double acc = 0.0;
            for (; k < topics; ++k) {
                acc += pi[k];
                if (u <= acc) break;
            }
            if (k == topics) k = topics - 1;
            double v = unif(rng);
            int w = 0;
            acc = 0.0;
            for (; w < vocab; ++w) {
                acc += corpus.beta_true(k, w);
                if (v <= acc) break;
            }
            if (w == vocab) w = vocab - 1;
            counts[w] += 1;
        }
        Document doc;
        for (const auto& [w, c] : counts) {
            doc.counts.emplace_back(w, c);
            doc.total += c;
        }
        return doc;
    };

    for (int d = 0; d < n_train; ++d) {
        corpus.train.docs.push_back(draw_doc());
        corpus.train.ids.push_back(d);
    }
    for (int d = 0; d < n_heldout; ++d) {
        corpus.heldout.docs.push_back(draw_doc());
        corpus.heldout.ids.push_back(n_train + d);
    }
    return corpus;
}

// --- perplexity -------------------------------------------------------------------

struct PerplexityResult {
    double value = 0.0;
    int docs_used = 0;
    int docs_skipped = 0;  // documents too short to split
};

// Document-completion protocol: estimate topic proportions on the first half
// of each document's tokens by Gibbs, score the second half under
// p(w) = sum_k pi_k beta_kw, and report exp(-mean log p).
inline PerplexityResult perplexity(const ThetaMatrix& theta, const DocumentBatch& heldout,
                                   const LdaConfig& config, Rng& rng) {
    if (heldout.docs.empty()) throw config_error("perplexity: empty held-out batch");
    const int k_topics = theta.topics;
    Matrix beta = theta.word_distributions();

    PerplexityResult result;
    double log_sum = 0.0;
    long long n_words = 0;

    for (const Document& doc : heldout.docs) {
        if (doc.total < 2) {
            ++result.docs_skipped;
            continue;
        }
        // alternating-token split of the expansion: deterministic, and both
        // halves cover the document's topics (a contiguous split would not,
        // since the expansion is sorted by word id)
        std::vector<int> tokens;
        tokens.reserve(static_cast<std::size_t>(doc.total));
        for (const auto& [w, c] : doc.counts)
            for (int i = 0; i < c; ++i) tokens.push_back(w);

        Document first;
        std::vector<int> second;
        std::map<int, int> counts;
        for (std::size_t j = 0; j < tokens.size(); ++j) {
            if (j % 2 == 0)
                counts[tokens[j]] += 1;
            else
                second.push_back(tokens[j]);
        }
        for (const auto& [w, c] : counts) {
            first.counts.emplace_back(w, c);
            first.total += c;
        }

        TopicExpectations e = gibbs_topic_expectations(theta, first, config.gamma,
                                                       config.gibbs_sweeps, config.gibbs_burnin,
                                                       rng);
        Vector pi(k_topics);
        double denom = k_topics * config.gamma + static_cast<double>(first.total);
        for (int k = 0; k < k_topics; ++k) pi[k] = (config.gamma + e.margins[k]) / denom;

        for (int w : second) {
            double pw = 0.0;
            for (int k = 0; k < k_topics; ++k) pw += pi[k] * beta(k, w);
            log_sum += std::log(pw);
            ++n_words;
        }
        ++result.docs_used;
    }
    if (n_words == 0) throw config_error("perplexity: no scoreable held-out words");
    result.value = std::exp(-log_sum / static_cast<double>(n_words));
    return result;
}

// --- sampler glue ------------------------------------------------------------------

// Gradient estimator over a fixed corpus: resamples a document minibatch per
// call and returns the potential gradient of the flattened theta.
inline GradientEstimator make_lda_gradient_estimator(const DocumentBatch& corpus,
                                                     const LdaConfig& config) {
    if (corpus.docs.empty()) throw config_error("lda estimator: empty corpus");
    LdaConfig cfg = config;
    cfg.corpus_size = corpus.size();
    cfg.check();
    if (cfg.minibatch_docs > corpus.size())
        throw config_error("lda estimator: minibatch larger than the corpus");
    return [corpus, cfg](const Vector& theta_flat, Rng& rng) {
        ThetaMatrix theta(cfg.topics, cfg.vocab, theta_flat);
        // uniform without-replacement document subset
        std::vector<std::size_t> pool(corpus.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
        for (std::size_t i = 0; i < cfg.minibatch_docs; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, corpus.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.minibatch_docs));
        DocumentBatch batch;
        for (std::size_t i = 0; i < cfg.minibatch_docs; ++i) {
            batch.docs.push_back(corpus.docs[pool[i]]);
            batch.ids.push_back(corpus.ids[pool[i]]);
        }
        double scale =
            static_cast<double>(corpus.size()) / static_cast<double>(cfg.minibatch_docs);
        GradientEstimate e;
        e.grad = stochastic_grad(theta, batch, cfg, scale, rng);
        return e;
    };
}

}  // namespace sgmcmc::lda
