#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sresdmd/bounds.hpp"
#include "sresdmd/pseudospectra.hpp"
#include "sresdmd/spectral.hpp"

namespace sresdmd {

// Writers for the files read by the plotting scripts. All numbers use
// csv::format, so identical inputs give byte-identical files.

/// re(lambda),im(lambda),res_var,res,integrated_variance; the last two are
/// empty without H.
void write_eigs_csv(const std::filesystem::path& path,
                    const std::vector<SpectralResult<double>>& pairs);

struct GridMeta {
  std::string dictionary;
  Index dictionary_size = 0;
};

/// re(z),im(z),r,flagged plus "<path>.json" with kind, epsilon, N, grid and
/// dictionary.
void write_pseudospectrum_csv(const std::filesystem::path& path,
                              const PseudospectrumGrid<double>& grid, const GridMeta& meta);

struct ForecastRow {
  int n = 0;
  double norm_prediction = 0;  // |Psi K^n g| in the data-weighted norm
  double C_n = 0;
  double delta_n = 0;
};

void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastRow>& rows);

struct BoundsRow {
  double M = 0;
  double t = 0;
  ConcentrationBounds bounds;
};

/// M,t,p_A,p_G,p_L,vacuous
void write_bounds_csv(const std::filesystem::path& path, const std::vector<BoundsRow>& rows);

struct PseudospectrumRecord {
  cdouble z;
  double r = 0;
  bool flagged = false;
};

/// Reads back a pseudospectrum CSV; rejects a wrong header or an empty grid.
std::vector<PseudospectrumRecord> read_pseudospectrum_csv(const std::filesystem::path& path);

struct EigRecord {
  cdouble lambda;
  double res_var = 0;
  std::optional<double> res;
  std::optional<double> integrated_variance;
};

std::vector<EigRecord> read_eigs_csv(const std::filesystem::path& path);

}  // namespace sresdmd
