#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "grid_function.hpp"
#include "sample_path.hpp"

namespace irrdrift::io {

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string grid_function_csv(const GridFunction& f) {
    std::ostringstream os;
    os << "x,value\n";
    for (std::size_t i = 0; i < f.size(); ++i)
        os << format_double(f.node(i)) << ',' << format_double(f.value(i)) << '\n';
    return os.str();
}

inline std::string sample_path_csv(const SamplePath& p) {
    std::ostringstream os;
    os << "t,value\n";
    for (std::size_t i = 0; i < p.size(); ++i)
        os << format_double(p.time(i)) << ',' << format_double(p.values[i]) << '\n';
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

// CSV with `x,value` header plus a JSON sidecar <path>.json holding the grid metadata.
inline void write_grid_function(const std::string& path, const GridFunction& f) {
    write_file(path, grid_function_csv(f));
    nlohmann::json meta{{"x_min", f.x_min()}, {"x_max", f.x_max()}, {"n_points", f.size()}};
    write_file(path + ".json", meta.dump() + "\n");
}

inline GridFunction read_grid_function(const std::string& path) {
    std::ifstream meta_in(path + ".json");
    if (!meta_in) throw std::runtime_error("missing sidecar: " + path + ".json");
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("bad csv row: " + line);
        values.push_back(std::stod(line.substr(comma + 1)));
    }
    if (values.size() != meta.at("n_points").get<std::size_t>())
        throw std::runtime_error("csv row count disagrees with sidecar: " + path);
    return GridFunction(meta.at("x_min").get<double>(), meta.at("x_max").get<double>(),
                        std::move(values));
}

}  // namespace irrdrift::io
