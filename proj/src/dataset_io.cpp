#include "ctdelay/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

namespace ctdelay {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view field, const std::string& where) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty())
        throw std::invalid_argument(where + ": cannot parse number '" + std::string(field) + "'");
    return v;
}

json model_json(const CtModel& m) { return {{"num", m.num()}, {"den", m.den()}, {"delay", m.delay()}}; }

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    return p;
}

void write_dataset(const std::filesystem::path& csv, const SampledDataset& data, const DatasetMeta& meta) {
    data.validate();
    std::string text = "t,u,y\n";
    text.reserve(data.size() * 64);
    for (std::size_t k = 0; k < data.size(); ++k)
        text += format_double(data.t[k]) + ',' + format_double(data.u[k]) + ',' + format_double(data.y[k]) + '\n';
    write_text(csv, text);

    json side;
    side["format"] = "ctdelay-dataset";
    side["samples"] = data.size();
    side["intersample"] = data.intersample == Intersample::Zoh ? "zoh" : "foh";
    side["clock_edges"] = data.u_clock_edges ? json(*data.u_clock_edges) : json(nullptr);
    side["true_system"] = meta.true_system ? model_json(*meta.true_system) : json(nullptr);
    side["snr_db"] = meta.snr_db ? json(*meta.snr_db) : json(nullptr);
    side["empirical_snr_db"] = std::isfinite(meta.empirical_snr_db) ? json(meta.empirical_snr_db) : json(nullptr);
    side["seeds"] = {{"sampling", meta.sampling_seed}, {"noise", meta.noise_seed}};
    write_text(sidecar_path(csv), side.dump(2) + "\n");
}

SampledDataset read_dataset(const std::filesystem::path& csv, DatasetMeta* meta) {
    std::ifstream in(csv, std::ios::binary);
    if (!in) throw IoError("cannot open " + csv.string());
    SampledDataset data;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = csv.string() + ":" + std::to_string(lineno);
        if (!header) {
            if (line != "t,u,y") throw std::invalid_argument(where + ": expected header 't,u,y'");
            header = true;
            continue;
        }
        std::string_view rest(line);
        double v[3];
        for (int i = 0; i < 3; ++i) {
            const auto comma = rest.find(',');
            if ((i < 2) != (comma != std::string_view::npos))
                throw std::invalid_argument(where + ": expected 3 comma-separated fields");
            v[i] = parse_double(rest.substr(0, comma), where);
            if (i < 2) rest.remove_prefix(comma + 1);
        }
        data.t.push_back(v[0]);
        data.u.push_back(v[1]);
        data.y.push_back(v[2]);
    }
    if (in.bad()) throw IoError("read failed for " + csv.string());
    if (!header) throw std::invalid_argument(csv.string() + ": empty file");

    const auto side_path = sidecar_path(csv);
    if (std::filesystem::exists(side_path)) {
        std::ifstream sin(side_path);
        if (!sin) throw IoError("cannot open " + side_path.string());
        json side;
        try {
            side = json::parse(sin);
            const std::string mode = side.value("intersample", "zoh");
            if (mode == "foh")
                data.intersample = Intersample::Foh;
            else if (mode != "zoh")
                throw std::invalid_argument("unknown intersample mode '" + mode + "'");
            if (side.contains("clock_edges") && !side["clock_edges"].is_null())
                data.u_clock_edges = side["clock_edges"].get<std::vector<double>>();
            if (meta) {
                *meta = DatasetMeta{};
                if (side.contains("true_system") && !side["true_system"].is_null()) {
                    const auto& m = side["true_system"];
                    meta->true_system = CtModel(m.at("num").get<std::vector<double>>(),
                                                m.at("den").get<std::vector<double>>(), m.at("delay").get<double>());
                }
                if (side.contains("snr_db") && !side["snr_db"].is_null()) meta->snr_db = side["snr_db"].get<double>();
                const auto& e = side.value("empirical_snr_db", json(nullptr));
                meta->empirical_snr_db = e.is_null() ? INFINITY : e.get<double>();
                if (side.contains("seeds")) {
                    meta->sampling_seed = side["seeds"].value("sampling", std::uint64_t{0});
                    meta->noise_seed = side["seeds"].value("noise", std::uint64_t{0});
                }
            }
        } catch (const json::exception& e) {
            throw std::invalid_argument(side_path.string() + ": " + e.what());
        }
    }
    try {
        data.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(csv.string() + ": " + e.what());
    }
    return data;
}

}  // namespace ctdelay
