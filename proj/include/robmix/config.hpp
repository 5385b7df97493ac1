#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace robmix
{
  /**
   * Flat `key=value` configuration text.
   *
   * Blank lines and `#` comments are ignored, whitespace around keys and values is trimmed.
   * Later assignments override earlier ones.
   */
  class KeyValueConfig
  {
  public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::istream &Stream);
    static KeyValueConfig parseText(const std::string &Text);
    static KeyValueConfig load(const std::string &Path);

    bool has(const std::string &Key) const;
    void set(const std::string &Key, const std::string &Value);

    std::optional<std::string> getString(const std::string &Key) const;
    std::string getString(const std::string &Key, const std::string &Default) const;
    double getDouble(const std::string &Key, double Default) const;
    std::optional<double> getDouble(const std::string &Key) const;
    std::int64_t getInt(const std::string &Key, std::int64_t Default) const;
    std::uint64_t getUInt64(const std::string &Key, std::uint64_t Default) const;
    bool getBool(const std::string &Key, bool Default) const;

    /** Comma separated list of numbers. */
    std::vector<double> getDoubleList(const std::string &Key) const;
    /** Comma separated list of words. */
    std::vector<std::string> getStringList(const std::string &Key) const;

    const std::map<std::string, std::string> &entries() const { return Entries_; }

  private:
    std::map<std::string, std::string> Entries_;
  };

  std::string trim(const std::string &Text);
  std::vector<std::string> split(const std::string &Text, char Delimiter);

  /** Shortest text that round-trips a double exactly (17 significant digits). */
  std::string formatDouble(double Value);
  double parseDouble(const std::string &Text);
}
