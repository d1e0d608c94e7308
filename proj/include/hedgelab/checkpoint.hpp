#pragma once

#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgelab/net.hpp"

namespace hedgelab {

// Text checkpoint: metadata lines plus named, shaped arrays of decimal
// values. Values are written with 17 significant digits so doubles
// round-trip bit-exactly.
struct Checkpoint {
    std::map<std::string, std::string> meta;
    std::map<std::string, Matrix> arrays;

    void put_array(const std::string& name, const Matrix& m) { arrays[name] = m; }

    void put_vector(const std::string& name, const std::vector<double>& v) {
        Matrix m(1, int(v.size()));
        m.data = v;
        arrays[name] = m;
    }

    const Matrix& array(const std::string& name) const {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw std::runtime_error("checkpoint: missing array " + name);
        return it->second;
    }

    std::string meta_value(const std::string& key) const {
        auto it = meta.find(key);
        if (it == meta.end()) throw std::runtime_error("checkpoint: missing meta key " + key);
        return it->second;
    }

    void save(std::ostream& os) const {
        os << "hedgelab-checkpoint 1\n";
        for (const auto& [k, v] : meta) os << "meta " << k << " " << v << "\n";
        char buf[40];
        for (const auto& [name, m] : arrays) {
            os << "array " << name << " " << m.rows << " " << m.cols << "\n";
            for (std::size_t i = 0; i < m.data.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", m.data[i]);
                os << buf << ((i + 1) % 8 == 0 || i + 1 == m.data.size() ? '\n' : ' ');
            }
            if (m.data.empty()) os << "\n";
        }
    }

    void save_file(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
        save(os);
    }

    static Checkpoint load(std::istream& is) {
        Checkpoint ck;
        std::string line;
        if (!std::getline(is, line) || line != "hedgelab-checkpoint 1")
            throw std::runtime_error("checkpoint: bad header");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string tag;
            ls >> tag;
            if (tag == "meta") {
                std::string key;
                ls >> key;
                std::string value;
                std::getline(ls, value);
                if (!value.empty() && value.front() == ' ') value.erase(0, 1);
                ck.meta[key] = value;
            } else if (tag == "array") {
                std::string name;
                int rows = 0, cols = 0;
                ls >> name >> rows >> cols;
                if (name.empty() || rows < 0 || cols < 0)
                    throw std::runtime_error("checkpoint: bad array header: " + line);
                Matrix m(rows, cols);
                for (auto& v : m.data)
                    if (!(is >> v)) throw std::runtime_error("checkpoint: truncated array " + name);
                is.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
                ck.arrays[name] = std::move(m);
            } else {
                throw std::runtime_error("checkpoint: unknown record: " + line);
            }
        }
        return ck;
    }

    static Checkpoint load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
        return load(is);
    }
};

inline void checkpoint_put_network(Checkpoint& ck, const std::string& prefix, const Network& net) {
    std::ostringstream spec;
    for (std::size_t i = 0; i < net.spec().widths.size(); ++i)
        spec << (i ? "," : "") << net.spec().widths[i];
    ck.meta[prefix + ".widths"] = spec.str();
    ck.meta[prefix + ".output"] =
        net.spec().output == OutputActivation::bounded ? "bounded" : "identity";
    ck.meta[prefix + ".adam_step"] = std::to_string(net.adam().step);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const std::string base = prefix + ".layer" + std::to_string(l);
        ck.put_array(base + ".weights", net.layers()[l].weights);
        ck.put_vector(base + ".bias", net.layers()[l].bias);
        ck.put_array(base + ".adam_m.weights", net.adam().m[l].weights);
        ck.put_vector(base + ".adam_m.bias", net.adam().m[l].bias);
        ck.put_array(base + ".adam_v.weights", net.adam().v[l].weights);
        ck.put_vector(base + ".adam_v.bias", net.adam().v[l].bias);
    }
}

inline Network checkpoint_get_network(const Checkpoint& ck, const std::string& prefix) {
    NetworkSpec spec;
    std::istringstream ws(ck.meta_value(prefix + ".widths"));
    std::string tok;
    while (std::getline(ws, tok, ',')) spec.widths.push_back(std::stoi(tok));
    spec.output = ck.meta_value(prefix + ".output") == "bounded" ? OutputActivation::bounded
                                                                 : OutputActivation::identity;
    Rng dummy(0);
    Network net(spec, dummy);
    net.adam().step = std::stol(ck.meta_value(prefix + ".adam_step"));
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const std::string base = prefix + ".layer" + std::to_string(l);
        net.layers()[l].weights = ck.array(base + ".weights");
        net.layers()[l].bias = ck.array(base + ".bias").data;
        net.adam().m[l].weights = ck.array(base + ".adam_m.weights");
        net.adam().m[l].bias = ck.array(base + ".adam_m.bias").data;
        net.adam().v[l].weights = ck.array(base + ".adam_v.weights");
        net.adam().v[l].bias = ck.array(base + ".adam_v.bias").data;
    }
    return net;
}

}  // namespace hedgelab
