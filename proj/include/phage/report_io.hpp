#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "phage/analysis.hpp"
#include "phage/types.hpp"

namespace phage {

inline constexpr const char* kUnitsLegend = "units: t in days; S, Q in tens of millions of units";

/// `t,S,Q` rows with 17 significant digits, then the positivity report and
/// any extra lines as `#` comments.
void write_trajectory_csv(std::ostream& out, const HistoryTrajectory& traj,
                          const std::vector<std::string>& comments = {});

/// `eps,rho,t_a,t_b,n_paths,exceed,p_hat,ci_lo,ci_hi,failures`, one row per estimate.
void write_ensemble_csv(std::ostream& out, const std::vector<ConcentrationEstimate>& rows,
                        const std::vector<std::string>& comments = {});

struct PlotSeries {
    std::string label;
    std::string color;
    const HistoryTrajectory* traj = nullptr;
};

/// Self-contained SVG with an S panel above a Q panel.
std::string render_trajectory_svg(const std::vector<PlotSeries>& series, const std::string& title);

std::string xml_escape(const std::string& s);

}  // namespace phage
