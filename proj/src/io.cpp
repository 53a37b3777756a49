#include "ctxsat/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ctxsat {

using json = nlohmann::json;

namespace {

int line_of_byte(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

json parse_json(const std::string& text, int line_offset = 0) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), line_offset + line_of_byte(text, e.byte));
    }
}

template <typename T>
T field(const json& obj, const char* key, int line) {
    if (!obj.is_object() || !obj.contains(key))
        throw ParseError(std::string("missing field '") + key + "'", line);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("field '") + key + "': " + e.what(), line);
    }
}

}  // namespace

std::string serialize_model(const MaxSatModel& model) {
    json clauses = json::array(), hard = json::array(), weights = json::array();
    for (const auto& c : model.constraints()) {
        clauses.push_back(c.clause.to_dimacs());
        hard.push_back(c.hard);
        weights.push_back(c.weight);
    }
    json doc = {{"n", model.n()}, {"clauses", clauses}, {"hard", hard}, {"weights", weights}};
    return doc.dump(2) + "\n";
}

MaxSatModel deserialize_model(const std::string& text) {
    const json doc = parse_json(text);
    const int n = field<int>(doc, "n", 1);
    const auto clauses = field<std::vector<std::vector<int>>>(doc, "clauses", 1);
    const auto hard = field<std::vector<bool>>(doc, "hard", 1);
    const auto weights = field<std::vector<double>>(doc, "weights", 1);
    if (clauses.size() != hard.size() || clauses.size() != weights.size())
        throw ParseError("clauses/hard/weights lengths differ", 1);
    std::vector<Constraint> cons;
    for (std::size_t j = 0; j < clauses.size(); ++j) {
        try {
            cons.push_back({Clause::from_dimacs(clauses[j]), static_cast<bool>(hard[j]), weights[j]});
        } catch (const StructuralError& e) {
            throw ParseError("clauses[" + std::to_string(j) + "]: " + e.what(), 1);
        }
    }
    try {
        return MaxSatModel(n, std::move(cons));
    } catch (const StructuralError& e) {
        throw ParseError(e.what(), 1);
    }
}

std::string serialize_dataset(const Dataset& data) {
    std::ostringstream out;
    json header = {{"n", data.n}, {"metadata", data.metadata}};
    out << header.dump() << '\n';
    for (const auto& e : data.examples) {
        json line = {{"context", e.context.to_dimacs()},
                     {"assignment", e.assignment.bits()},
                     {"label", e.label ? 1 : 0}};
        if (e.kind != ExampleKind::Unknown) line["kind"] = to_string(e.kind);
        out << line.dump() << '\n';
    }
    return out.str();
}

Dataset deserialize_dataset(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    int n = -1;
    std::map<std::string, std::string> metadata;
    std::vector<ContextualExample> examples;
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        const json obj = parse_json(raw, line_no - 1);
        if (n < 0) {
            n = field<int>(obj, "n", line_no);
            if (obj.contains("metadata")) metadata = field<std::map<std::string, std::string>>(obj, "metadata", line_no);
            continue;
        }
        const auto ctx = field<std::vector<int>>(obj, "context", line_no);
        const auto bits = field<std::vector<int>>(obj, "assignment", line_no);
        const int label = field<int>(obj, "label", line_no);
        if (label != 0 && label != 1) throw ParseError("label must be 0 or 1", line_no);
        if (static_cast<int>(bits.size()) != n)
            throw ParseError("assignment has " + std::to_string(bits.size()) + " bits, expected " +
                                 std::to_string(n),
                             line_no);
        ExampleKind kind = ExampleKind::Unknown;
        if (obj.contains("kind")) kind = example_kind_from_string(field<std::string>(obj, "kind", line_no));
        try {
            examples.emplace_back(Context::from_dimacs(ctx), Assignment::from_bits(bits), label == 1, kind);
        } catch (const StructuralError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (n < 0) throw ParseError("dataset has no header line");
    return Dataset(n, std::move(examples), std::move(metadata));
}

std::string export_wcnf(const MaxSatModel& model, long long scale) {
    if (scale <= 0) throw ArgumentError("wcnf scale must be positive");
    std::vector<long long> soft;
    long long total = 0;
    for (const auto& c : model.constraints()) {
        long long w = 0;
        if (!c.hard) {
            w = std::llround(c.weight * static_cast<double>(scale));
            if (w == 0 && c.weight > 0.0) w = 1;
        }
        soft.push_back(w);
        total += w;
    }
    const long long top = total + 1;
    std::ostringstream out;
    out << "c soft weights scaled by factor " << scale << "; hard clauses carry top weight\n";
    out << "p wcnf " << model.n() << ' ' << model.size() << ' ' << top << '\n';
    for (std::size_t j = 0; j < model.size(); ++j) {
        const auto& c = model[j];
        out << (c.hard ? top : soft[j]);
        for (int v : c.clause.to_dimacs()) out << ' ' << v;
        out << " 0\n";
    }
    return out.str();
}

CnfFormula parse_dimacs_cnf(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    CnfFormula f;
    long long declared = -1;
    std::vector<int> pending;
    auto flush = [&](int at) {
        std::set<int> uniq(pending.begin(), pending.end());
        pending.clear();
        bool taut = false;
        for (int v : uniq) taut = taut || uniq.count(-v);
        if (taut) {
            ++f.dropped_tautologies;
            return;
        }
        if (uniq.empty()) throw ParseError("empty clause", at);
        for (int v : uniq)
            if (std::abs(v) > f.n) throw ParseError("literal " + std::to_string(v) + " exceeds declared n", at);
        f.clauses.push_back(Clause::from_dimacs(std::vector<int>(uniq.begin(), uniq.end())));
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::istringstream ls(raw);
        std::string tok;
        if (!(ls >> tok) || tok[0] == 'c') continue;
        if (tok == "%") break;  // SATLIB end marker
        if (tok == "p") {
            std::string kind;
            if (!(ls >> kind >> f.n >> declared) || kind != "cnf") throw ParseError("bad problem line", line_no);
            if (f.n < 1 || f.n > kMaxVars) throw ParseError("variable count out of range", line_no);
            continue;
        }
        if (declared < 0) throw ParseError("clause before problem line", line_no);
        do {
            int v = 0;
            try {
                std::size_t used = 0;
                v = std::stoi(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError("bad literal '" + tok + "'", line_no);
            }
            if (v == 0) flush(line_no);
            else pending.push_back(v);
        } while (ls >> tok);
    }
    if (!pending.empty()) flush(line_no);
    if (declared < 0) throw ParseError("missing problem line");
    return f;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace ctxsat
