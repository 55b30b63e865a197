#include "sresdmd/reports.hpp"

#include <fstream>

#include <json.hpp>

#include "sresdmd/csv.hpp"

namespace sresdmd {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

std::string opt_field(const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); }

std::vector<std::vector<std::string_view>> read_table(const std::filesystem::path& path,
                                                      std::string_view header,
                                                      std::vector<std::string>& storage) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw SchemaError("expected header '" + std::string(header) + "', got '" + line + "'");
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    storage.push_back(line);
  }
  std::vector<std::vector<std::string_view>> rows;
  const std::size_t width = csv::split(header).size();
  for (std::size_t i = 0; i < storage.size(); ++i) {
    if (csv::trim(storage[i]).empty()) continue;
    auto fields = csv::split(storage[i]);
    if (fields.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields", static_cast<long>(i + 2));
    rows.push_back(std::move(fields));
  }
  return rows;
}

double need_double(std::string_view f, std::size_t row) {
  double v;
  if (!csv::parse_double(f, v)) throw ParseError("bad number '" + std::string(f) + "'", static_cast<long>(row + 2));
  return v;
}

std::optional<double> maybe_double(std::string_view f, std::size_t row) {
  if (csv::trim(f).empty()) return std::nullopt;
  return need_double(f, row);
}

constexpr std::string_view kEigsHeader = "re(lambda),im(lambda),res_var,res,integrated_variance";
constexpr std::string_view kGridHeader = "re(z),im(z),r,flagged";

}  // namespace

void write_eigs_csv(const std::filesystem::path& path,
                    const std::vector<SpectralResult<double>>& pairs) {
  auto out = open_out(path);
  out << kEigsHeader << '\n';
  for (const auto& p : pairs)
    out << csv::format(p.eigenvalue.real()) << ',' << csv::format(p.eigenvalue.imag()) << ','
        << csv::format(p.res_var) << ',' << opt_field(p.res) << ','
        << opt_field(p.integrated_variance) << '\n';
  finish(out, path);
}

void write_pseudospectrum_csv(const std::filesystem::path& path,
                              const PseudospectrumGrid<double>& grid, const GridMeta& meta) {
  auto out = open_out(path);
  out << kGridHeader << '\n';
  for (std::size_t i = 0; i < grid.points.size(); ++i)
    out << csv::format(grid.points[i].real()) << ',' << csv::format(grid.points[i].imag()) << ','
        << csv::format(grid.values[i]) << ',' << (grid.flagged(i) ? 1 : 0) << '\n';
  finish(out, path);

  nlohmann::ordered_json side;
  side["kind"] = to_string(grid.kind);
  side["epsilon"] = grid.epsilon;
  side["N"] = meta.dictionary_size;
  side["dictionary"] = meta.dictionary;
  side["grid"] = grid.provenance;
  side["points"] = grid.points.size();
  side["flagged"] = grid.flagged_count();
  const auto side_path = std::filesystem::path(path.string() + ".json");
  auto js = open_out(side_path);
  js << side.dump(2) << '\n';
  finish(js, side_path);
}

void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastRow>& rows) {
  auto out = open_out(path);
  out << "n,norm_prediction,C_n,delta_n\n";
  for (const auto& r : rows)
    out << r.n << ',' << csv::format(r.norm_prediction) << ',' << csv::format(r.C_n) << ','
        << csv::format(r.delta_n) << '\n';
  finish(out, path);
}

void write_bounds_csv(const std::filesystem::path& path, const std::vector<BoundsRow>& rows) {
  auto out = open_out(path);
  out << "M,t,p_A,p_G,p_L,vacuous\n";
  for (const auto& r : rows)
    out << csv::format(r.M) << ',' << csv::format(r.t) << ',' << csv::format(r.bounds.p_A) << ','
        << csv::format(r.bounds.p_G) << ',' << csv::format(r.bounds.p_L) << ','
        << (r.bounds.vacuous ? 1 : 0) << '\n';
  finish(out, path);
}

std::vector<PseudospectrumRecord> read_pseudospectrum_csv(const std::filesystem::path& path) {
  std::vector<std::string> storage;
  const auto rows = read_table(path, kGridHeader, storage);
  if (rows.empty()) throw ParseError("pseudospectrum grid has no points", 2);
  std::vector<PseudospectrumRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    long flag;
    if (!csv::parse_long(rows[i][3], flag) || (flag != 0 && flag != 1))
      throw ParseError("flagged must be 0 or 1", static_cast<long>(i + 2));
    out.push_back({{need_double(rows[i][0], i), need_double(rows[i][1], i)}, need_double(rows[i][2], i),
                   flag == 1});
  }
  return out;
}

std::vector<EigRecord> read_eigs_csv(const std::filesystem::path& path) {
  std::vector<std::string> storage;
  const auto rows = read_table(path, kEigsHeader, storage);
  std::vector<EigRecord> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.push_back({{need_double(rows[i][0], i), need_double(rows[i][1], i)}, need_double(rows[i][2], i),
                   maybe_double(rows[i][3], i), maybe_double(rows[i][4], i)});
  return out;
}

}  // namespace sresdmd
