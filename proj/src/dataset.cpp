#include "absnet/dataset.hpp"

#include <fstream>
#include <sstream>

#include "absnet/errors.hpp"

namespace absnet {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw data_error("FileNotFound", "cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("WriteFailed", "cannot write " + p.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw data_error("WriteFailed", "short write to " + p.string());
}

std::string image_file_name(const std::string& pair_id) {
    std::string out;
    for (char c : pair_id) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') out += c;
        else out += '_';
    }
    return out + ".png";
}

json text_to_json(const TokenizedText& t) { return json(t.sentences); }

TokenizedText text_from_json(const json& j) {
    TokenizedText t;
    t.sentences = j.get<std::vector<std::vector<std::string>>>();
    return t;
}

std::vector<const ImageTextPair*> Dataset::with_split(Split s) const {
    std::vector<const ImageTextPair*> out;
    for (const auto& p : pairs)
        if (p.split == s) out.push_back(&p);
    return out;
}

json count_summary(const std::vector<ImageTextPair>& pairs) {
    json by_label = json::object(), by_split = json::object(), by_label_split = json::object();
    for (const auto& p : pairs) {
        const std::string lab = p.label ? label_string(*p.label) : "unlabeled";
        const std::string sp = split_string(p.split);
        by_label[lab] = by_label.value(lab, 0) + 1;
        by_split[sp] = by_split.value(sp, 0) + 1;
        if (!by_label_split.contains(lab)) by_label_split[lab] = json::object();
        by_label_split[lab][sp] = by_label_split[lab].value(sp, 0) + 1;
    }
    return json{{"total", pairs.size()}, {"by_label", by_label}, {"by_split", by_split},
                {"by_label_split", by_label_split}};
}

void write_manifest(const fs::path& dir, const json& manifest) {
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_dataset(const fs::path& dir, const std::vector<ImageTextPair>& pairs, const json& manifest_extra) {
    fs::create_directories(dir / "images");
    std::ostringstream lines;
    int image_size = 0;
    for (const auto& p : pairs) {
        const std::string rel = "images/" + image_file_name(p.pair_id);
        write_file(dir / rel, encode_png(to_rgb(p.image)));
        image_size = p.image.height;
        json rec{{"pair_id", p.pair_id},
                 {"image_path", rel},
                 {"sentences", text_to_json(p.text)},
                 {"label", p.label ? json(label_string(*p.label)) : json(nullptr)},
                 {"source", p.source},
                 {"split", split_string(p.split)}};
        lines << rec.dump() << "\n";
    }
    write_file(dir / "pairs.jsonl", lines.str());
    json manifest{{"counts", count_summary(pairs)}, {"image_size", image_size}};
    for (auto it = manifest_extra.begin(); it != manifest_extra.end(); ++it) manifest[it.key()] = it.value();
    write_manifest(dir, manifest);
}

Dataset read_dataset(const fs::path& dir) {
    if (!fs::exists(dir / "pairs.jsonl")) throw data_error("DatasetNotFound", "no pairs.jsonl in " + dir.string());
    Dataset ds;
    ds.root = dir;
    if (fs::exists(dir / "manifest.json")) {
        try {
            ds.manifest = json::parse(read_file(dir / "manifest.json"));
        } catch (const json::exception& e) {
            throw data_error("CorruptDataset", std::string("manifest.json: ") + e.what());
        }
    }
    std::istringstream in(read_file(dir / "pairs.jsonl"));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json rec = json::parse(line);
            ImageTextPair p;
            p.pair_id = rec.at("pair_id").get<std::string>();
            p.text = text_from_json(rec.at("sentences"));
            if (!rec.at("label").is_null()) p.label = parse_label(rec.at("label").get<std::string>());
            p.source = rec.value("source", "");
            p.split = parse_split(rec.value("split", "unsplit"));
            p.image = to_preprocessed(decode_image(read_file(dir / rec.at("image_path").get<std::string>())));
            ds.pairs.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw data_error("CorruptDataset", "pairs.jsonl line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return ds;
}

}  // namespace absnet
