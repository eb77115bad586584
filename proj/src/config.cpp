#include "absnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "absnet/errors.hpp"
#include "absnet/kernels.hpp"

namespace absnet {

std::vector<int> DecoderConfig::stage_sizes() const {
    std::vector<int> sizes{seed_side};
    for (double f : upsample) sizes.push_back(kernels::upsampled_size(sizes.back(), f));
    return sizes;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::PretrainAe: return "pretrain_ae";
        case Regime::ClScratch: return "cl_scratch";
        case Regime::ClFreeze: return "cl_freeze";
        case Regime::ClTransfer: return "cl_transfer";
    }
    return "?";
}

Regime parse_regime(const std::string& s) {
    if (s == "pretrain_ae") return Regime::PretrainAe;
    if (s == "cl_scratch" || s == "scratch") return Regime::ClScratch;
    if (s == "cl_freeze" || s == "freeze") return Regime::ClFreeze;
    if (s == "cl_transfer" || s == "transfer") return Regime::ClTransfer;
    throw usage_error("ConstraintViolation", "unknown regime '" + s + "'");
}

Profile parse_profile(const std::string& s) {
    if (s == "desk") return Profile::Desk;
    if (s == "paper-scale" || s == "paper_scale") return Profile::PaperScale;
    throw usage_error("ConstraintViolation", "unknown profile '" + s + "'");
}

const char* profile_name(Profile p) { return p == Profile::Desk ? "desk" : "paper-scale"; }

Profile default_profile() {
    const char* env = std::getenv("ABSNET_PROFILE");
    if (env == nullptr || *env == '\0') return Profile::Desk;
    return parse_profile(env);
}

RunConfig RunConfig::defaults(Profile p) {
    RunConfig c;
    c.profile = p;
    if (p == Profile::PaperScale) {
        c.set("image_size", "300");
        c.set("d_img", "1536");
        c.set("d_txt", "864");
        c.set("gru_hidden", "432");
        c.set("attn_size", "256");
        c.set("word_dim", "300");
        c.set("vocab_max", "25000");
        c.set("seed_side", "30");
        c.set("seed_channels", "128");
        c.set("dec_channels", "128,64,32,3");
        c.set("sent_hidden", "512");
        c.set("word_hidden", "512");
        c.set("batch_size", "15");
        c.set("max_iterations", "360000");
    }
    return c;
}

namespace {

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(x);
    } catch (const std::exception&) {
        throw usage_error("ConstraintViolation", key + ": expected integer, got '" + v + "'");
    }
}

long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw usage_error("ConstraintViolation", key + ": expected integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw usage_error("ConstraintViolation", key + ": expected number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw usage_error("ConstraintViolation", key + ": expected boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto b = item.find_first_not_of(" \t");
        auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

std::string fmt_double(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

struct KeyDef {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = [] {
        std::vector<KeyDef> t;
        auto add = [&](std::string name, auto set, auto get) { t.push_back(KeyDef{std::move(name), set, get}); };

        add("image_size",
            [](RunConfig& c, const std::string& v) { c.enc.image_size = c.dec.image_size = to_int("image_size", v); },
            [](const RunConfig& c) { return std::to_string(c.enc.image_size); });
        add("d_img",
            [](RunConfig& c, const std::string& v) {
                c.enc.d_img = to_int("d_img", v);
                c.dec.embedding_dim = c.cls.embedding_dim = c.enc.embedding_dim();
            },
            [](const RunConfig& c) { return std::to_string(c.enc.d_img); });
        add("d_txt",
            [](RunConfig& c, const std::string& v) {
                c.enc.d_txt = to_int("d_txt", v);
                c.dec.embedding_dim = c.cls.embedding_dim = c.enc.embedding_dim();
            },
            [](const RunConfig& c) { return std::to_string(c.enc.d_txt); });
        add("embedding",
            [](RunConfig& c, const std::string& v) {
                c.embedding_declared = to_int("embedding", v);
            },
            [](const RunConfig& c) { return std::to_string(c.dec.embedding_dim); });
        add("cnn_channels",
            [](RunConfig& c, const std::string& v) {
                c.enc.cnn_channels.clear();
                for (auto& s : split_list(v)) c.enc.cnn_channels.push_back(to_int("cnn_channels", s));
            },
            [](const RunConfig& c) { return join(c.enc.cnn_channels); });
        add("gru_hidden", [](RunConfig& c, const std::string& v) { c.enc.gru_hidden = to_int("gru_hidden", v); },
            [](const RunConfig& c) { return std::to_string(c.enc.gru_hidden); });
        add("attn_size", [](RunConfig& c, const std::string& v) { c.enc.attn_size = to_int("attn_size", v); },
            [](const RunConfig& c) { return std::to_string(c.enc.attn_size); });
        add("image_backbone",
            [](RunConfig& c, const std::string& v) {
                if (v == "desk_cnn") c.enc.backbone = ImageBackbone::DeskCnn;
                else if (v == "external_features") c.enc.backbone = ImageBackbone::ExternalFeatures;
                else throw usage_error("ConstraintViolation", "image_backbone: unknown value '" + v + "'");
            },
            [](const RunConfig& c) {
                return std::string(c.enc.backbone == ImageBackbone::DeskCnn ? "desk_cnn" : "external_features");
            });
        add("features_path", [](RunConfig& c, const std::string& v) { c.features_path = v; },
            [](const RunConfig& c) { return c.features_path; });
        add("word_dim",
            [](RunConfig& c, const std::string& v) { c.enc.word_dim = c.dec.word_dim = to_int("word_dim", v); },
            [](const RunConfig& c) { return std::to_string(c.enc.word_dim); });
        add("train_embeddings",
            [](RunConfig& c, const std::string& v) { c.enc.train_embeddings = to_bool("train_embeddings", v); },
            [](const RunConfig& c) { return std::string(c.enc.train_embeddings ? "true" : "false"); });
        add("vocab_max", [](RunConfig& c, const std::string& v) { c.vocab_max = to_int("vocab_max", v); },
            [](const RunConfig& c) { return std::to_string(c.vocab_max); });
        add("vectors_path", [](RunConfig& c, const std::string& v) { c.vectors_path = v; },
            [](const RunConfig& c) { return c.vectors_path; });
        add("max_sentences",
            [](RunConfig& c, const std::string& v) {
                c.enc.max_sentences = c.dec.max_sentences = to_int("max_sentences", v);
            },
            [](const RunConfig& c) { return std::to_string(c.enc.max_sentences); });
        add("max_words",
            [](RunConfig& c, const std::string& v) { c.enc.max_words = c.dec.max_words = to_int("max_words", v); },
            [](const RunConfig& c) { return std::to_string(c.enc.max_words); });
        add("seed_side", [](RunConfig& c, const std::string& v) { c.dec.seed_side = to_int("seed_side", v); },
            [](const RunConfig& c) { return std::to_string(c.dec.seed_side); });
        add("seed_channels",
            [](RunConfig& c, const std::string& v) { c.dec.seed_channels = to_int("seed_channels", v); },
            [](const RunConfig& c) { return std::to_string(c.dec.seed_channels); });
        add("dec_channels",
            [](RunConfig& c, const std::string& v) {
                c.dec.channels.clear();
                for (auto& s : split_list(v)) c.dec.channels.push_back(to_int("dec_channels", s));
            },
            [](const RunConfig& c) { return join(c.dec.channels); });
        add("upsample",
            [](RunConfig& c, const std::string& v) {
                c.dec.upsample.clear();
                for (auto& s : split_list(v)) c.dec.upsample.push_back(to_double("upsample", s));
            },
            [](const RunConfig& c) { return join(c.dec.upsample); });
        add("sent_hidden", [](RunConfig& c, const std::string& v) { c.dec.sent_hidden = to_int("sent_hidden", v); },
            [](const RunConfig& c) { return std::to_string(c.dec.sent_hidden); });
        add("word_hidden", [](RunConfig& c, const std::string& v) { c.dec.word_hidden = to_int("word_hidden", v); },
            [](const RunConfig& c) { return std::to_string(c.dec.word_hidden); });
        add("classifier_hidden",
            [](RunConfig& c, const std::string& v) { c.cls.hidden = to_int("classifier_hidden", v); },
            [](const RunConfig& c) { return std::to_string(c.cls.hidden); });
        add("batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = to_int("batch_size", v); },
            [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
        add("max_iterations",
            [](RunConfig& c, const std::string& v) { c.train.max_iterations = to_long("max_iterations", v); },
            [](const RunConfig& c) { return std::to_string(c.train.max_iterations); });
        add("learning_rate",
            [](RunConfig& c, const std::string& v) { c.train.learning_rate = to_double("learning_rate", v); },
            [](const RunConfig& c) { return fmt_double(c.train.learning_rate); });
        add("beta1", [](RunConfig& c, const std::string& v) { c.train.beta1 = to_double("beta1", v); },
            [](const RunConfig& c) { return fmt_double(c.train.beta1); });
        add("beta2", [](RunConfig& c, const std::string& v) { c.train.beta2 = to_double("beta2", v); },
            [](const RunConfig& c) { return fmt_double(c.train.beta2); });
        add("adam_eps", [](RunConfig& c, const std::string& v) { c.train.adam_eps = to_double("adam_eps", v); },
            [](const RunConfig& c) { return fmt_double(c.train.adam_eps); });
        add("clip_norm", [](RunConfig& c, const std::string& v) { c.train.clip_norm = to_double("clip_norm", v); },
            [](const RunConfig& c) { return fmt_double(c.train.clip_norm); });
        add("weight_decay",
            [](RunConfig& c, const std::string& v) { c.train.weight_decay = to_double("weight_decay", v); },
            [](const RunConfig& c) { return fmt_double(c.train.weight_decay); });
        add("w_img", [](RunConfig& c, const std::string& v) { c.train.w_img = to_double("w_img", v); },
            [](const RunConfig& c) { return fmt_double(c.train.w_img); });
        add("w_txt", [](RunConfig& c, const std::string& v) { c.train.w_txt = to_double("w_txt", v); },
            [](const RunConfig& c) { return fmt_double(c.train.w_txt); });
        add("seed",
            [](RunConfig& c, const std::string& v) {
                try {
                    std::size_t pos = 0;
                    c.train.seed = std::stoull(v, &pos);
                    if (pos != v.size()) throw std::invalid_argument(v);
                } catch (const std::exception&) {
                    throw usage_error("ConstraintViolation", "seed: expected unsigned integer, got '" + v + "'");
                }
            },
            [](const RunConfig& c) { return std::to_string(c.train.seed); });
        add("checkpoint_interval",
            [](RunConfig& c, const std::string& v) {
                c.train.checkpoint_interval = to_long("checkpoint_interval", v);
            },
            [](const RunConfig& c) { return std::to_string(c.train.checkpoint_interval); });
        add("log_interval",
            [](RunConfig& c, const std::string& v) { c.train.log_interval = to_long("log_interval", v); },
            [](const RunConfig& c) { return std::to_string(c.train.log_interval); });
        add("deterministic",
            [](RunConfig& c, const std::string& v) { c.train.deterministic = to_bool("deterministic", v); },
            [](const RunConfig& c) { return std::string(c.train.deterministic ? "true" : "false"); });
        add("threads", [](RunConfig& c, const std::string& v) { c.train.threads = to_int("threads", v); },
            [](const RunConfig& c) { return std::to_string(c.train.threads); });
        return t;
    }();
    return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& d : key_table()) k.push_back(d.name);
        return k;
    }();
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    for (const auto& d : key_table()) {
        if (d.name == key) {
            d.set(*this, value);
            return;
        }
    }
    if (key == "profile") {
        profile = parse_profile(value);
        return;
    }
    throw usage_error("UnknownKey", "unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    for (const auto& d : key_table()) kv[d.name] = d.get(*this);
    kv["profile"] = profile_name(profile);
    return kv;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw usage_error("ConstraintViolation", msg); };
    if (enc.image_size <= 0) fail("image_size must be positive");
    if (enc.d_img <= 0 || enc.d_txt <= 0) fail("d_img and d_txt must be positive");
    if (embedding_declared != 0 && enc.d_img + enc.d_txt != embedding_declared)
        fail("d_img + d_txt = " + std::to_string(enc.d_img + enc.d_txt) + " but embedding = " +
             std::to_string(embedding_declared));
    if (dec.embedding_dim != enc.embedding_dim() || cls.embedding_dim != enc.embedding_dim())
        fail("embedding width out of sync");
    if (enc.gru_hidden <= 0 || enc.attn_size <= 0) fail("gru_hidden and attn_size must be positive");
    if (2 * enc.gru_hidden != enc.d_txt)
        fail("d_txt must equal 2 * gru_hidden (bidirectional states feed the text feature)");
    if (enc.cnn_channels.empty()) fail("cnn_channels must be non-empty");
    for (int ch : enc.cnn_channels)
        if (ch <= 0) fail("cnn_channels entries must be positive");
    if (enc.word_dim <= 0) fail("word_dim must be positive");
    if (enc.max_sentences <= 0 || enc.max_words <= 0) fail("max_sentences and max_words must be positive");
    if (vocab_max <= 0) fail("vocab_max must be positive");
    if (dec.seed_side <= 0 || dec.seed_channels <= 0) fail("seed_side and seed_channels must be positive");
    if (dec.channels.size() != dec.upsample.size() + 1)
        fail("dec_channels must have one more entry than upsample");
    for (int ch : dec.channels)
        if (ch <= 0) fail("dec_channels entries must be positive");
    if (dec.channels.back() != 3) fail("final dec_channels entry must be 3");
    for (double f : dec.upsample)
        if (!(f >= 1.0)) fail("upsample factors must be >= 1");
    if (dec.stage_sizes().back() != dec.image_size)
        fail("seed_side x upsample product = " + std::to_string(dec.stage_sizes().back()) +
             " but image_size = " + std::to_string(dec.image_size));
    if (dec.sent_hidden <= 0 || dec.word_hidden <= 0) fail("sent_hidden and word_hidden must be positive");
    if (cls.hidden <= 0) fail("classifier_hidden must be positive");
    if (train.batch_size < 1) fail("batch_size must be >= 1");
    if (!(train.learning_rate > 0)) fail("learning_rate must be > 0");
    if (train.max_iterations < 0) fail("max_iterations must be >= 0");
    if (train.clip_norm < 0) fail("clip_norm must be >= 0");
    if (train.log_interval <= 0) fail("log_interval must be positive");
    if (train.threads < 0) fail("threads must be >= 0");
}

RunConfig parse_config_text(const std::string& text, Profile profile) {
    std::vector<std::pair<std::string, std::string>> lines;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](const std::string& s) {
        auto s0 = s.find_first_not_of(" \t\r");
        auto s1 = s.find_last_not_of(" \t\r");
        return s0 == std::string::npos ? std::string() : s.substr(s0, s1 - s0 + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw usage_error("ConstraintViolation", "line " + std::to_string(lineno) + ": expected key = value");
        lines.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    // a profile named in the file selects the defaults the file then overrides
    for (const auto& [k, v] : lines)
        if (k == "profile") profile = parse_profile(v);
    RunConfig cfg = RunConfig::defaults(profile);
    for (const auto& [k, v] : lines) cfg.set(k, v);
    return cfg;
}

RunConfig load_config(const std::string& path, Profile profile,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::string text;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw usage_error("ConfigNotFound", "cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    RunConfig cfg = parse_config_text(text, profile);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    cfg.validate();
    return cfg;
}

}  // namespace absnet
