#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eit/mesh.hpp"

namespace eit {

/// Piecewise-linear function of the normalized electrode coordinate t. Pieces
/// are sorted, non-overlapping and may jump between each other; the function
/// is zero outside all pieces. A piece owns [t0, t1).
class PiecewiseLinear {
 public:
  struct Piece {
    double t0, t1, v0, v1;
  };

  void add(double t0, double t1, double v0, double v1);
  double operator()(double t) const;
  /// Integral of f(t) * t^power over [0, 1], power in {0, 1}.
  double moment(int power) const;
  const std::vector<Piece>& pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }

 private:
  std::vector<Piece> pieces_;
};

enum class ContactVariant { cem, pl, ph };

std::string_view to_string(ContactVariant variant);
ContactVariant parse_variant(std::string_view name);

/// Parameters of the boundary conductance zeta(theta).
///  - cem: one value per electrode, zeta = theta_m^2 on E_m.
///  - pl:  one value per interior electrode node, nodal zeta = theta_k^2,
///         endpoint nodes pinned to zero.
///  - ph:  (h_1..h_M, l_1..l_M, w_1..w_M), hat of area h centered at l with
///         width w in the normalized coordinate.
struct ContactParams {
  ContactVariant variant = ContactVariant::cem;
  std::vector<double> theta;
};

inline constexpr double kPhFloor = 1e-8;

/// Parameter count of `variant` on the given electrodes.
int contact_param_count(ContactVariant variant, std::span<const ExtendedElectrode> electrodes);
/// Electrode that parameter k acts on.
int contact_param_electrode(ContactVariant variant, std::span<const ExtendedElectrode> electrodes,
                            int k);
/// Offset of electrode m's first PL parameter.
int pl_offset(std::span<const ExtendedElectrode> electrodes, int m);

/// Conductance density on electrode m.
PiecewiseLinear zeta_density(const ContactParams& params,
                             std::span<const ExtendedElectrode> electrodes, int m);
double eval_zeta(const ContactParams& params, std::span<const ExtendedElectrode> electrodes,
                 int m, double t);
/// d zeta / d theta_k, supported on electrode contact_param_electrode(k).
PiecewiseLinear dzeta_dtheta(const ContactParams& params,
                             std::span<const ExtendedElectrode> electrodes, int k);

/// Projects PH parameters onto the feasible hat set. Identity for other variants.
ContactParams clamp_ph(ContactParams params);

/// Exact integrals of a density against the two linear basis functions of one
/// boundary edge; `a` is the edge start, `b` its end.
struct EdgeIntegrals {
  double aa = 0.0, ab = 0.0, bb = 0.0;
  double a = 0.0, b = 0.0;
  double total = 0.0;
};

EdgeIntegrals integrate_on_edge(const PiecewiseLinear& density, double t_start, double t_end,
                                double electrode_length);

/// Per boundary edge (indexed by loop position) integrals of zeta; zero on gaps.
std::vector<EdgeIntegrals> edge_zeta_integrals(const ContactParams& params, const TriMesh& mesh,
                                               std::span<const ExtendedElectrode> electrodes);

struct ContactSummary {
  std::vector<double> net_conductance;          // integral of zeta over E_m (S)
  std::vector<std::optional<double>> center;    // center of mass in arclength (m)
  std::optional<double> log_mean;
  std::optional<double> log_std;  // sample standard deviation
};

ContactSummary summarize(const ContactParams& params,
                         std::span<const ExtendedElectrode> electrodes);

/// Contact parameters whose net conductance is `net` on every electrode, in the
/// standard starting configuration of each variant. For PH the hat is centered
/// with normalized width `ph_width[m]`.
ContactParams uniform_contact(ContactVariant variant, std::span<const ExtendedElectrode> electrodes,
                              double net, std::span<const double> ph_width = {});

// CSV: `variant,<name>`, header `electrode,param_name,value`, one row per
// parameter. PL parameter names are `node:<global node id>`.
void write_contact_csv(const std::filesystem::path& path, const ContactParams& params,
                       std::span<const ExtendedElectrode> electrodes);
ContactParams read_contact_csv(const std::filesystem::path& path,
                               std::span<const ExtendedElectrode> electrodes);

}  // namespace eit
