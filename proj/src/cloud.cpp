#include "m3/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace m3 {

namespace {

void check_finite(double v, const char* what, std::size_t record) {
    if (!std::isfinite(v)) {
        throw CloudError(std::string("non-finite ") + what + " at record " +
                         std::to_string(record));
    }
}

ChannelStats population_stats(const std::vector<double>& v) {
    ChannelStats s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) {
        const double d = x - s.mean;
        var += d * d;
    }
    s.stddev = std::sqrt(var / static_cast<double>(v.size()));
    return s;
}

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CloudError("unexpected end of file");
    return v;
}

constexpr char kMagic[4] = {'M', '3', 'P', 'C'};

}  // namespace

void LabeledPointCloud::validate() const {
    const std::size_t n = positions.size();
    if (n == 0) throw CloudError("empty cloud");
    if (scalar_names.size() != scalars.size() ||
        vector_names.size() != vectors.size()) {
        throw CloudError("channel name/data count mismatch");
    }
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        if (scalars[k].size() != n) {
            throw CloudError("scalar channel '" + scalar_names[k] +
                             "' length mismatch: " +
                             std::to_string(scalars[k].size()) + " vs " +
                             std::to_string(n));
        }
    }
    for (std::size_t j = 0; j < vectors.size(); ++j) {
        if (vectors[j].size() != n) {
            throw CloudError("vector channel '" + vector_names[j] +
                             "' length mismatch: " +
                             std::to_string(vectors[j].size()) + " vs " +
                             std::to_string(n));
        }
    }
    if (!geom_weights.empty()) {
        if (geom_weights.size() != n) throw CloudError("weights length mismatch");
        bool any_positive = false;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = geom_weights[i];
            if (!std::isfinite(w) || w < 0.0) {
                throw CloudError("invalid geometric weight at record " +
                                 std::to_string(i));
            }
            if (w > 0.0) any_positive = true;
        }
        if (!any_positive) throw CloudError("all geometric weights are zero");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) check_finite(positions[i][a], "position", i);
    }
    for (std::size_t k = 0; k < scalars.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            check_finite(scalars[k][i], "scalar value", i);
        }
    }
    for (std::size_t j = 0; j < vectors.size(); ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            for (int a = 0; a < 3; ++a) {
                check_finite(vectors[j][i][a], "vector value", i);
            }
        }
    }
}

LabeledPointCloud zscore_normalize(const LabeledPointCloud& cloud) {
    LabeledPointCloud out = cloud;
    out.scalar_stats.clear();
    out.vector_stats.clear();
    for (auto& ch : out.scalars) {
        ChannelStats s = population_stats(ch);
        if (s.stddev > 0.0) {
            for (double& x : ch) x = (x - s.mean) / s.stddev;
        } else {
            std::fill(ch.begin(), ch.end(), 0.0);
        }
        out.scalar_stats.push_back(s);
    }
    for (auto& ch : out.vectors) {
        std::array<ChannelStats, 3> st;
        std::vector<double> comp(ch.size());
        for (int a = 0; a < 3; ++a) {
            for (std::size_t i = 0; i < ch.size(); ++i) comp[i] = ch[i][a];
            st[a] = population_stats(comp);
            if (st[a].stddev > 0.0) {
                for (auto& v : ch) v[a] = (v[a] - st[a].mean) / st[a].stddev;
            } else {
                for (auto& v : ch) v[a] = 0.0;
            }
        }
        out.vector_stats.push_back(st);
    }
    out.normalized = true;
    return out;
}

BoundingCube compute_bounds(const LabeledPointCloud& cloud) {
    if (cloud.positions.empty()) throw CloudError("empty cloud");
    Vec3 lo = cloud.positions[0];
    Vec3 hi = cloud.positions[0];
    for (const auto& p : cloud.positions) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    double extent = 0.0;
    for (int a = 0; a < 3; ++a) extent = std::max(extent, hi[a] - lo[a]);
    BoundingCube cube;
    if (extent == 0.0) {
        // all points coincident: unit cube centered on the point
        for (int a = 0; a < 3; ++a) cube.origin[a] = lo[a] - 0.5;
        cube.edge = 1.0;
        return cube;
    }
    cube.origin = lo;
    cube.edge = extent * (1.0 + 1e-9);
    return cube;
}

void save_cloud(const LabeledPointCloud& cloud, const std::string& path,
                CloudFormat format) {
    cloud.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CloudError("cannot open for writing: " + path);
    const std::uint64_t n = cloud.size();

    if (format == CloudFormat::Binary) {
        os.write(kMagic, 4);
        write_raw<std::uint32_t>(os, 1);
        write_raw<std::uint64_t>(os, n);
        write_raw<std::uint16_t>(os, static_cast<std::uint16_t>(cloud.num_scalars()));
        write_raw<std::uint16_t>(os, static_cast<std::uint16_t>(cloud.num_vectors()));
        write_raw<std::uint8_t>(os, cloud.has_weights() ? 1 : 0);
        auto write_name = [&](const std::string& name) {
            write_raw<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
        };
        for (const auto& name : cloud.scalar_names) write_name(name);
        for (const auto& name : cloud.vector_names) write_name(name);
        os.write(reinterpret_cast<const char*>(cloud.positions.data()),
                 static_cast<std::streamsize>(n * 3 * sizeof(double)));
        for (const auto& ch : cloud.scalars) {
            os.write(reinterpret_cast<const char*>(ch.data()),
                     static_cast<std::streamsize>(n * sizeof(double)));
        }
        for (const auto& ch : cloud.vectors) {
            os.write(reinterpret_cast<const char*>(ch.data()),
                     static_cast<std::streamsize>(n * 3 * sizeof(double)));
        }
        if (cloud.has_weights()) {
            os.write(reinterpret_cast<const char*>(cloud.geom_weights.data()),
                     static_cast<std::streamsize>(n * sizeof(double)));
        }
    } else {
        os << "x,y,z";
        for (const auto& name : cloud.scalar_names) os << ",s:" << name;
        for (const auto& name : cloud.vector_names) {
            os << ",v:" << name << "_x,v:" << name << "_y,v:" << name << "_z";
        }
        if (cloud.has_weights()) os << ",w";
        os << "\n";
        os.precision(17);
        for (std::uint64_t i = 0; i < n; ++i) {
            os << cloud.positions[i][0] << ',' << cloud.positions[i][1] << ','
               << cloud.positions[i][2];
            for (const auto& ch : cloud.scalars) os << ',' << ch[i];
            for (const auto& ch : cloud.vectors) {
                os << ',' << ch[i][0] << ',' << ch[i][1] << ',' << ch[i][2];
            }
            if (cloud.has_weights()) os << ',' << cloud.geom_weights[i];
            os << "\n";
        }
    }
    if (!os) throw CloudError("write failed: " + path);
}

namespace {

LabeledPointCloud load_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CloudError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw CloudError("malformed header: bad magic in " + path);
    }
    const auto version = read_raw<std::uint32_t>(is);
    if (version != 1) {
        throw CloudError("unsupported M3PC version " + std::to_string(version));
    }
    const auto n = read_raw<std::uint64_t>(is);
    if (n == 0) throw CloudError("malformed header: zero points");
    const auto n_scalar = read_raw<std::uint16_t>(is);
    const auto n_vector = read_raw<std::uint16_t>(is);
    const auto has_weights = read_raw<std::uint8_t>(is);

    LabeledPointCloud cloud;
    auto read_name = [&]() {
        const auto len = read_raw<std::uint16_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw CloudError("unexpected end of file in channel names");
        return name;
    };
    for (std::uint16_t k = 0; k < n_scalar; ++k) {
        cloud.scalar_names.push_back(read_name());
    }
    for (std::uint16_t j = 0; j < n_vector; ++j) {
        cloud.vector_names.push_back(read_name());
    }
    cloud.positions.resize(n);
    is.read(reinterpret_cast<char*>(cloud.positions.data()),
            static_cast<std::streamsize>(n * 3 * sizeof(double)));
    if (!is) throw CloudError("unexpected end of file in positions");
    cloud.scalars.resize(n_scalar);
    for (auto& ch : cloud.scalars) {
        ch.resize(n);
        is.read(reinterpret_cast<char*>(ch.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw CloudError("unexpected end of file in scalar channel");
    }
    cloud.vectors.resize(n_vector);
    for (auto& ch : cloud.vectors) {
        ch.resize(n);
        is.read(reinterpret_cast<char*>(ch.data()),
                static_cast<std::streamsize>(n * 3 * sizeof(double)));
        if (!is) throw CloudError("unexpected end of file in vector channel");
    }
    if (has_weights) {
        cloud.geom_weights.resize(n);
        is.read(reinterpret_cast<char*>(cloud.geom_weights.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw CloudError("unexpected end of file in weights");
    }
    return cloud;
}

LabeledPointCloud load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw CloudError("cannot open: " + path);
    std::string header;
    if (!std::getline(is, header)) throw CloudError("malformed header: empty file");

    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(col);
    }
    if (cols.size() < 3 || cols[0] != "x" || cols[1] != "y" || cols[2] != "z") {
        throw CloudError("malformed header: expected x,y,z leading columns");
    }

    LabeledPointCloud cloud;
    // column kind per index: 0 position, 1 scalar, 2 vector component, 3 weight
    struct ColRef { int kind; std::size_t channel; int comp; };
    std::vector<ColRef> refs;
    refs.push_back({0, 0, 0});
    refs.push_back({0, 0, 1});
    refs.push_back({0, 0, 2});
    for (std::size_t c = 3; c < cols.size(); ++c) {
        const std::string& col = cols[c];
        if (col == "w") {
            refs.push_back({3, 0, 0});
        } else if (col.rfind("s:", 0) == 0) {
            cloud.scalar_names.push_back(col.substr(2));
            cloud.scalars.emplace_back();
            refs.push_back({1, cloud.scalars.size() - 1, 0});
        } else if (col.rfind("v:", 0) == 0) {
            const std::string body = col.substr(2);
            if (body.size() < 3 || body[body.size() - 2] != '_') {
                throw CloudError("malformed header: bad vector column " + col);
            }
            const char axis = body.back();
            const int comp = axis == 'x' ? 0 : axis == 'y' ? 1 : axis == 'z' ? 2 : -1;
            if (comp < 0) throw CloudError("malformed header: bad vector axis in " + col);
            const std::string name = body.substr(0, body.size() - 2);
            if (comp == 0) {
                cloud.vector_names.push_back(name);
                cloud.vectors.emplace_back();
            } else if (cloud.vector_names.empty() || cloud.vector_names.back() != name) {
                throw CloudError("malformed header: out-of-order vector column " + col);
            }
            refs.push_back({2, cloud.vectors.size() - 1, comp});
        } else {
            throw CloudError("malformed header: unknown column " + col);
        }
    }

    std::string line;
    std::size_t record = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        Vec3 pos{};
        Vec3 vec{};
        std::size_t c = 0;
        for (; std::getline(ss, tok, ','); ++c) {
            if (c >= refs.size()) break;
            double v;
            try {
                v = std::stod(tok);
            } catch (const std::exception&) {
                throw CloudError("malformed value at record " + std::to_string(record));
            }
            const ColRef& r = refs[c];
            switch (r.kind) {
                case 0:
                    pos[r.comp] = v;
                    break;
                case 1:
                    cloud.scalars[r.channel].push_back(v);
                    break;
                case 2:
                    vec[r.comp] = v;
                    if (r.comp == 2) cloud.vectors[r.channel].push_back(vec);
                    break;
                case 3:
                    cloud.geom_weights.push_back(v);
                    break;
            }
        }
        if (c != refs.size()) {
            throw CloudError("wrong column count at record " + std::to_string(record));
        }
        cloud.positions.push_back(pos);
        ++record;
    }
    return cloud;
}

}  // namespace

LabeledPointCloud load_cloud(const std::string& path, CloudFormat format) {
    LabeledPointCloud cloud = format == CloudFormat::Binary ? load_binary(path)
                                                            : load_csv(path);
    cloud.validate();
    return cloud;
}

}  // namespace m3
