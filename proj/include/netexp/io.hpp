#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "netexp/common.hpp"
#include "netexp/graph.hpp"

namespace netexp {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  long column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<long>(k);
    return -1;
  }
};

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw data_error(path + ": row " + std::to_string(table.rows.size() + 2) + " has " +
                         std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(table.header.size()));
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw data_error(path + ": empty file");
  return table;
}

inline long parse_long(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error(context + ": cannot parse integer from '" + s + "'");
  }
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw data_error(context + ": cannot parse number from '" + s + "'");
  }
}

// Edge list with header src,dst and 0-based ids.
inline std::vector<std::pair<int, int>> load_edge_list(const std::string& path) {
  CsvTable table = read_csv(path);
  const long src = table.column("src");
  const long dst = table.column("dst");
  if (src < 0 || dst < 0) throw data_error(path + ": expected header columns src,dst");
  std::vector<std::pair<int, int>> edges;
  edges.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    edges.emplace_back(
        static_cast<int>(parse_long(row[static_cast<std::size_t>(src)], path + " row " + std::to_string(r + 2))),
        static_cast<int>(parse_long(row[static_cast<std::size_t>(dst)], path + " row " + std::to_string(r + 2))));
  }
  return edges;
}

// Node table with columns id, eligible, block, D, Y, x*, p; unrecognized
// columns are ignored. Rows may appear in any order; ids must cover [0, n).
struct NodeTable {
  long n = 0;
  std::vector<bool> eligible;
  bool has_eligible = false;
  std::vector<int> block;  // contiguous block ids; -1 when no block column
  std::vector<std::string> block_names;
  bool has_block = false;
  std::vector<int> d;
  bool has_d = false;
  Eigen::VectorXd y;
  bool has_y = false;
  Eigen::MatrixXd x;
  std::vector<std::string> x_names;
  Eigen::VectorXd p;
  bool has_p = false;
};

inline NodeTable load_node_table(const std::string& path) {
  CsvTable table = read_csv(path);
  const long id_col = table.column("id");
  if (id_col < 0) throw data_error(path + ": missing required column id");
  NodeTable nodes;
  nodes.n = static_cast<long>(table.rows.size());

  std::vector<long> order(static_cast<std::size_t>(nodes.n), -1);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    long id = parse_long(table.rows[r][static_cast<std::size_t>(id_col)], path + " column id");
    if (id < 0 || id >= nodes.n)
      throw data_error(path + ": id " + std::to_string(id) + " outside [0," +
                       std::to_string(nodes.n) + ")");
    if (order[static_cast<std::size_t>(id)] >= 0)
      throw data_error(path + ": duplicate id " + std::to_string(id));
    order[static_cast<std::size_t>(id)] = static_cast<long>(r);
  }

  auto fetch = [&](long col, long i) -> const std::string& {
    return table.rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]
                     [static_cast<std::size_t>(col)];
  };

  const long eligible_col = table.column("eligible");
  nodes.has_eligible = eligible_col >= 0;
  nodes.eligible.assign(static_cast<std::size_t>(nodes.n), true);
  if (nodes.has_eligible)
    for (long i = 0; i < nodes.n; ++i)
      nodes.eligible[static_cast<std::size_t>(i)] =
          parse_long(fetch(eligible_col, i), path + " column eligible, id " + std::to_string(i)) != 0;

  const long block_col = table.column("block");
  nodes.has_block = block_col >= 0;
  nodes.block.assign(static_cast<std::size_t>(nodes.n), -1);
  if (nodes.has_block) {
    std::map<std::string, int> ids;
    for (long i = 0; i < nodes.n; ++i) {
      const std::string& name = fetch(block_col, i);
      if (name.empty()) continue;
      auto [it, inserted] = ids.emplace(name, static_cast<int>(ids.size()));
      nodes.block[static_cast<std::size_t>(i)] = it->second;
      (void)inserted;
    }
    nodes.block_names.resize(ids.size());
    for (const auto& [name, b] : ids) nodes.block_names[static_cast<std::size_t>(b)] = name;
  }

  const long d_col = table.column("D");
  nodes.has_d = d_col >= 0;
  nodes.d.assign(static_cast<std::size_t>(nodes.n), 0);
  if (nodes.has_d)
    for (long i = 0; i < nodes.n; ++i)
      nodes.d[static_cast<std::size_t>(i)] = static_cast<int>(
          parse_long(fetch(d_col, i), path + " column D, id " + std::to_string(i)));

  const long y_col = table.column("Y");
  nodes.has_y = y_col >= 0;
  if (nodes.has_y) {
    nodes.y.resize(nodes.n);
    for (long i = 0; i < nodes.n; ++i)
      nodes.y[i] = parse_double(fetch(y_col, i), path + " column Y, id " + std::to_string(i));
  }

  const long p_col = table.column("p");
  nodes.has_p = p_col >= 0;
  if (nodes.has_p) {
    nodes.p.resize(nodes.n);
    for (long i = 0; i < nodes.n; ++i)
      nodes.p[i] = parse_double(fetch(p_col, i), path + " column p, id " + std::to_string(i));
  }

  for (std::size_t k = 0; k < table.header.size(); ++k)
    if (!table.header[k].empty() && table.header[k][0] == 'x') nodes.x_names.push_back(table.header[k]);
  nodes.x.resize(nodes.n, static_cast<long>(nodes.x_names.size()));
  for (std::size_t j = 0; j < nodes.x_names.size(); ++j) {
    const long col = table.column(nodes.x_names[j]);
    for (long i = 0; i < nodes.n; ++i)
      nodes.x(i, static_cast<long>(j)) = parse_double(
          fetch(col, i), path + " column " + nodes.x_names[j] + ", id " + std::to_string(i));
  }
  return nodes;
}

// Fixed-precision numeric formatting so repeated runs are byte-identical.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << content;
}

}  // namespace netexp
