#include "ggps/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ggps {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

template <typename Mat>
json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_to_json(m.row(r).transpose()));
    return rows;
}

void json_to_vec(const json& a, Eigen::Ref<Eigen::VectorXd> v, const char* what) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != v.size())
        throw std::runtime_error(std::string("dataset: bad array size for ") + what);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = a[static_cast<size_t>(i)].get<double>();
}

template <typename Mat>
void json_to_mat(const json& a, Mat& m, const char* what) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != m.rows())
        throw std::runtime_error(std::string("dataset: bad row count for ") + what);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::VectorXd row(m.cols());
        json_to_vec(a[static_cast<size_t>(r)], row, what);
        m.row(r) = row;
    }
}

} // namespace

void save_dataset(const std::string& path, const DatasetHeader& header,
                  const std::vector<RawCase>& cases) {
    std::ofstream out(path, std::ios::binary);   // binary: no platform newline games
    if (!out) throw std::runtime_error("dataset: cannot open for writing: " + path);

    json h;
    h["schema_version"] = header.schema_version;
    h["seed"] = header.seed;
    h["oracle_version"] = header.oracle_version;
    h["bounds"]["lo"] = vec_to_json(header.bounds.lo);
    h["bounds"]["hi"] = vec_to_json(header.bounds.hi);
    out << h.dump() << "\n";

    for (const auto& c : cases) {
        json j;
        j["x"] = vec_to_json(c.x);
        j["y_aero"] = vec_to_json(c.y_aero);
        j["j_aero"] = mat_to_json(c.j_aero);
        j["y_noise"] = vec_to_json(c.y_noise);
        j["j_noise"] = mat_to_json(c.j_noise);
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("dataset: write failed: " + path);
}

LoadedDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open: " + path);

    LoadedDataset ds;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            std::ostringstream os;
            os << "dataset: parse error at line " << line_no << ": " << e.what();
            throw std::runtime_error(os.str());
        }
        if (line_no == 1) {
            ds.header.schema_version = j.at("schema_version").get<int>();
            if (ds.header.schema_version != 1) {
                std::ostringstream os;
                os << "dataset: unsupported schema version " << ds.header.schema_version;
                throw std::invalid_argument(os.str());
            }
            ds.header.seed = j.at("seed").get<std::uint64_t>();
            ds.header.oracle_version = j.at("oracle_version").get<std::string>();
            ds.header.bounds.lo.resize(kStateDim);
            ds.header.bounds.hi.resize(kStateDim);
            json_to_vec(j.at("bounds").at("lo"), ds.header.bounds.lo, "bounds.lo");
            json_to_vec(j.at("bounds").at("hi"), ds.header.bounds.hi, "bounds.hi");
            continue;
        }
        RawCase c;
        json_to_vec(j.at("x"), c.x, "x");
        json_to_vec(j.at("y_aero"), c.y_aero, "y_aero");
        json_to_mat(j.at("j_aero"), c.j_aero, "j_aero");
        json_to_vec(j.at("y_noise"), c.y_noise, "y_noise");
        json_to_mat(j.at("j_noise"), c.j_noise, "j_noise");
        ds.cases.push_back(c);
    }
    if (line_no == 0) throw std::runtime_error("dataset: file is empty: " + path);
    return ds;
}

} // namespace ggps
