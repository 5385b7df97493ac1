#pragma once

// Reference computations written directly from the closed-form definitions, independent of the
// library code they check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace oracle
{
  struct Gauss1
  {
    double W;
    double Mu;
    double Sigma;
  };

  /** w / sigma * exp(-0.5 ((e - mu) / sigma)^2), the unnormalized component density. */
  inline double density(const Gauss1 &G, double E)
  {
    const double Z = (E - G.Mu) / G.Sigma;
    return G.W / G.Sigma * std::exp(-0.5 * Z * Z);
  }

  /** Fully normalized scalar mixture density. */
  inline double normalizedDensity(const std::vector<Gauss1> &Mix, double E)
  {
    double Sum = 0.0;
    for (const auto &G : Mix)
    {
      Sum += density(G, E) / std::sqrt(2.0 * std::numbers::pi);
    }
    return Sum;
  }

  /** Branch cost -ln(c_j) + 0.5 q_j of one component. */
  inline double branchCost(const Gauss1 &G, double E)
  {
    const double Z = (E - G.Mu) / G.Sigma;
    return -std::log(G.W / G.Sigma) + 0.5 * Z * Z;
  }

  /** Max-Mixture negative log-likelihood, no gauge shift. */
  inline double maxMixtureCost(const std::vector<Gauss1> &Mix, double E)
  {
    double Best = INFINITY;
    for (const auto &G : Mix)
    {
      Best = std::min(Best, branchCost(G, E));
    }
    return Best;
  }

  /** Exact mixture negative log-likelihood with long double accumulation, no gauge shift. */
  inline double sumMixtureCost(const std::vector<Gauss1> &Mix, double E)
  {
    const double Best = maxMixtureCost(Mix, E);
    long double Sum = 0.0L;
    for (const auto &G : Mix)
    {
      Sum += std::exp(static_cast<long double>(Best - branchCost(G, E)));
    }
    return Best - static_cast<double>(std::log(Sum));
  }

  /** Draws m samples of a scalar mixture. */
  inline std::vector<double> sampleMixture(const std::vector<Gauss1> &Mix, std::size_t M, std::uint64_t Seed)
  {
    std::mt19937_64 Rng(Seed);
    std::vector<double> Weights;
    for (const auto &G : Mix)
    {
      Weights.push_back(G.W);
    }
    std::discrete_distribution<std::size_t> Pick(Weights.begin(), Weights.end());
    std::normal_distribution<double> Normal(0.0, 1.0);
    std::vector<double> Out(M);
    for (auto &V : Out)
    {
      const auto &G = Mix[Pick(Rng)];
      V = G.Mu + G.Sigma * Normal(Rng);
    }
    return Out;
  }

  inline double mean(const std::vector<double> &V)
  {
    double Sum = 0.0;
    for (double X : V)
    {
      Sum += X;
    }
    return Sum / static_cast<double>(V.size());
  }

  inline double stddev(const std::vector<double> &V)
  {
    const double Mu = mean(V);
    double Sum = 0.0;
    for (double X : V)
    {
      Sum += (X - Mu) * (X - Mu);
    }
    return std::sqrt(Sum / static_cast<double>(V.size()));
  }

  /** Standard normal upper tail. */
  inline double upperTail(double Z) { return 0.5 * std::erfc(Z / std::numbers::sqrt2); }

  /** Central difference derivative of a scalar function. */
  inline double derivative(const std::function<double(double)> &F, double X, double H = 1e-6)
  {
    return (F(X + H) - F(X - H)) / (2.0 * H);
  }

  inline std::string readFile(const std::filesystem::path &Path)
  {
    std::ifstream In(Path, std::ios::binary);
    std::ostringstream Out;
    Out << In.rdbuf();
    return Out.str();
  }

  /** Fresh empty directory below the working directory. */
  inline std::filesystem::path scratchDirectory(const std::string &Name)
  {
    const auto Dir = std::filesystem::current_path() / "scratch" / Name;
    std::filesystem::remove_all(Dir);
    std::filesystem::create_directories(Dir);
    return Dir;
  }
}
