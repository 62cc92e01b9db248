#include "sfr/field_io.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace sfr {

namespace {

const char* kSymNames[6] = {"00", "01", "02", "11", "12", "22"};
const int kSymIdx[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};

double parse_double(const char* b, const char* e) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e) throw SchemaError("snapshot: malformed number '" + std::string(b, e) + "'");
    return v;
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

void Snapshot::add(const std::string& name, const ScalarField& f) {
    names.push_back(name);
    columns.push_back(f.data);
}

void Snapshot::add(const std::string& name, const ComplexField& f) {
    std::vector<double> re(f.size()), im(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        re[i] = f[i].real();
        im[i] = f[i].imag();
    }
    names.push_back(name + ".re");
    columns.push_back(std::move(re));
    names.push_back(name + ".im");
    columns.push_back(std::move(im));
}

void Snapshot::add(const std::string& name, const VectorField& f) {
    for (int a = 0; a < 3; ++a) {
        std::vector<double> c(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) c[i] = f[i][a];
        names.push_back(name + "." + std::to_string(a));
        columns.push_back(std::move(c));
    }
}

void Snapshot::add_sym(const std::string& name, const TensorField& f) {
    for (int m = 0; m < 6; ++m) {
        std::vector<double> c(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) c[i] = f[i](kSymIdx[m][0], kSymIdx[m][1]);
        names.push_back(name + "." + kSymNames[m]);
        columns.push_back(std::move(c));
    }
}

const std::vector<double>& Snapshot::column(const std::string& name) const {
    for (std::size_t c = 0; c < names.size(); ++c)
        if (names[c] == name) return columns[c];
    throw SchemaError("snapshot: no column '" + name + "'");
}

ScalarField Snapshot::scalar(const std::string& name) const {
    ScalarField f(grid);
    f.data = column(name);
    return f;
}

ComplexField Snapshot::complex(const std::string& name) const {
    const auto& re = column(name + ".re");
    const auto& im = column(name + ".im");
    ComplexField f(grid);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = {re[i], im[i]};
    return f;
}

VectorField Snapshot::vector(const std::string& name) const {
    VectorField f(grid);
    for (int a = 0; a < 3; ++a) {
        const auto& c = column(name + "." + std::to_string(a));
        for (std::size_t i = 0; i < f.size(); ++i) f[i][a] = c[i];
    }
    return f;
}

TensorField Snapshot::sym(const std::string& name) const {
    TensorField f(grid);
    for (int m = 0; m < 6; ++m) {
        const auto& c = column(name + "." + kSymNames[m]);
        for (std::size_t i = 0; i < f.size(); ++i) {
            f[i](kSymIdx[m][0], kSymIdx[m][1]) = c[i];
            f[i](kSymIdx[m][1], kSymIdx[m][0]) = c[i];
        }
    }
    return f;
}

void write_snapshot(const std::string& prefix, const Snapshot& s) {
    nlohmann::ordered_json h;
    h["schema_version"] = 1;
    h["kind"] = s.kind;
    h["t"] = s.t;
    if (!s.meta.empty()) h["meta"] = s.meta;
    nlohmann::ordered_json axes = nlohmann::ordered_json::array();
    for (const auto& a : s.grid.axes())
        axes.push_back({{"name", a.name}, {"min", a.min}, {"max", a.max}, {"n", a.n}, {"periodic", a.periodic}});
    h["axes"] = axes;
    h["columns"] = s.names;
    h["rows"] = s.grid.size();
    {
        std::ofstream js(prefix + ".json");
        if (!js) throw DomainError("cannot write " + prefix + ".json");
        js << h.dump(2) << "\n";
    }
    std::ofstream csv(prefix + ".csv");
    if (!csv) throw DomainError("cannot write " + prefix + ".csv");
    csv << "# schema_version=1";
    for (const auto& [k, v] : s.meta) csv << " " << k << "=" << v;
    csv << "\n";
    csv << "x0,x1,x2";
    for (const auto& n : s.names) csv << "," << n;
    csv << "\n";
    std::string line;
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
        const Vec3 x = s.grid.point(i);
        line = format_double(x[0]) + "," + format_double(x[1]) + "," + format_double(x[2]);
        for (const auto& c : s.columns) {
            line += ",";
            line += format_double(c[i]);
        }
        csv << line << "\n";
    }
}

Snapshot read_snapshot(const std::string& prefix) {
    std::ifstream js(prefix + ".json");
    if (!js) throw SchemaError("cannot read " + prefix + ".json");
    nlohmann::json h;
    try {
        js >> h;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("snapshot header: ") + e.what());
    }
    if (h.value("schema_version", 0) != 1) throw SchemaError("snapshot header: unsupported schema_version");
    Snapshot s;
    std::array<Axis, 3> axes;
    for (int a = 0; a < 3; ++a) {
        const auto& ja = h.at("axes").at(a);
        axes[a] = Axis{ja.at("min").get<double>(), ja.at("max").get<double>(), ja.at("n").get<int>(),
                       ja.at("periodic").get<bool>(), ja.at("name").get<std::string>()};
    }
    s.grid = make_grid(axes);
    s.t = h.at("t").get<double>();
    s.kind = h.at("kind").get<std::string>();
    if (h.contains("meta")) s.meta = h.at("meta").get<std::map<std::string, std::string>>();
    s.names = h.at("columns").get<std::vector<std::string>>();
    s.columns.assign(s.names.size(), std::vector<double>(s.grid.size()));

    std::ifstream csv(prefix + ".csv");
    if (!csv) throw SchemaError("cannot read " + prefix + ".csv");
    std::string line;
    do std::getline(csv, line);
    while (csv && !line.empty() && line[0] == '#');
    std::size_t row = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        if (row >= s.grid.size()) throw SchemaError("snapshot: too many rows");
        const char* p = line.data();
        const char* end = p + line.size();
        std::size_t col = 0;
        while (p <= end) {
            const char* q = std::find(p, end, ',');
            if (col >= 3) {
                if (col - 3 >= s.columns.size()) throw SchemaError("snapshot: too many columns");
                s.columns[col - 3][row] = parse_double(p, q);
            }
            ++col;
            p = q + 1;
        }
        if (col != s.columns.size() + 3) throw SchemaError("snapshot: wrong column count");
        ++row;
    }
    if (row != s.grid.size()) throw SchemaError("snapshot: row count does not match grid");
    return s;
}

}  // namespace sfr
