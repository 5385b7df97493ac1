#include "robmix/config.hpp"
#include "robmix/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace robmix
{
  std::string trim(const std::string &Text)
  {
    const auto Begin = Text.find_first_not_of(" \t\r\n");
    if (Begin == std::string::npos)
    {
      return {};
    }
    const auto End = Text.find_last_not_of(" \t\r\n");
    return Text.substr(Begin, End - Begin + 1);
  }

  std::vector<std::string> split(const std::string &Text, char Delimiter)
  {
    std::vector<std::string> Parts;
    std::string Current;
    std::istringstream Stream(Text);
    while (std::getline(Stream, Current, Delimiter))
    {
      Parts.push_back(trim(Current));
    }
    return Parts;
  }

  std::string formatDouble(double Value)
  {
    char Buffer[32];
    std::snprintf(Buffer, sizeof(Buffer), "%.17g", Value);
    return Buffer;
  }

  double parseDouble(const std::string &Text)
  {
    const std::string Clean = trim(Text);
    double Value = 0.0;
    const auto *Begin = Clean.data();
    const auto *End = Clean.data() + Clean.size();
    auto [Ptr, Ec] = std::from_chars(Begin, End, Value);
    if (Ec != std::errc() || Ptr != End || Clean.empty())
    {
      throw ValidationError("not a number: '" + Text + "'");
    }
    return Value;
  }

  KeyValueConfig KeyValueConfig::parse(std::istream &Stream)
  {
    KeyValueConfig Config;
    std::string Line;
    int LineNumber = 0;
    while (std::getline(Stream, Line))
    {
      ++LineNumber;
      const auto Hash = Line.find('#');
      if (Hash != std::string::npos)
      {
        Line.erase(Hash);
      }
      Line = trim(Line);
      if (Line.empty())
      {
        continue;
      }
      const auto Eq = Line.find('=');
      if (Eq == std::string::npos)
      {
        throw ValidationError("config line " + std::to_string(LineNumber) + ": expected key=value");
      }
      const std::string Key = trim(Line.substr(0, Eq));
      if (Key.empty())
      {
        throw ValidationError("config line " + std::to_string(LineNumber) + ": empty key");
      }
      Config.Entries_[Key] = trim(Line.substr(Eq + 1));
    }
    return Config;
  }

  KeyValueConfig KeyValueConfig::parseText(const std::string &Text)
  {
    std::istringstream Stream(Text);
    return parse(Stream);
  }

  KeyValueConfig KeyValueConfig::load(const std::string &Path)
  {
    std::ifstream File(Path);
    if (!File)
    {
      throw IoError("cannot open config file '" + Path + "'");
    }
    return parse(File);
  }

  bool KeyValueConfig::has(const std::string &Key) const
  {
    return Entries_.count(Key) > 0;
  }

  void KeyValueConfig::set(const std::string &Key, const std::string &Value)
  {
    Entries_[Key] = Value;
  }

  std::optional<std::string> KeyValueConfig::getString(const std::string &Key) const
  {
    const auto It = Entries_.find(Key);
    if (It == Entries_.end())
    {
      return std::nullopt;
    }
    return It->second;
  }

  std::string KeyValueConfig::getString(const std::string &Key, const std::string &Default) const
  {
    return getString(Key).value_or(Default);
  }

  std::optional<double> KeyValueConfig::getDouble(const std::string &Key) const
  {
    const auto Value = getString(Key);
    if (!Value)
    {
      return std::nullopt;
    }
    try
    {
      return parseDouble(*Value);
    }
    catch (const ValidationError &)
    {
      throw ValidationError("config key '" + Key + "': not a number: '" + *Value + "'");
    }
  }

  double KeyValueConfig::getDouble(const std::string &Key, double Default) const
  {
    return getDouble(Key).value_or(Default);
  }

  std::int64_t KeyValueConfig::getInt(const std::string &Key, std::int64_t Default) const
  {
    const auto Value = getString(Key);
    if (!Value)
    {
      return Default;
    }
    std::int64_t Result = 0;
    auto [Ptr, Ec] = std::from_chars(Value->data(), Value->data() + Value->size(), Result);
    if (Ec != std::errc() || Ptr != Value->data() + Value->size() || Value->empty())
    {
      throw ValidationError("config key '" + Key + "': not an integer: '" + *Value + "'");
    }
    return Result;
  }

  std::uint64_t KeyValueConfig::getUInt64(const std::string &Key, std::uint64_t Default) const
  {
    const auto Value = getString(Key);
    if (!Value)
    {
      return Default;
    }
    std::uint64_t Result = 0;
    auto [Ptr, Ec] = std::from_chars(Value->data(), Value->data() + Value->size(), Result);
    if (Ec != std::errc() || Ptr != Value->data() + Value->size() || Value->empty())
    {
      throw ValidationError("config key '" + Key + "': not an unsigned integer: '" + *Value + "'");
    }
    return Result;
  }

  bool KeyValueConfig::getBool(const std::string &Key, bool Default) const
  {
    const auto Value = getString(Key);
    if (!Value)
    {
      return Default;
    }
    if (*Value == "true" || *Value == "1" || *Value == "yes" || *Value == "on")
    {
      return true;
    }
    if (*Value == "false" || *Value == "0" || *Value == "no" || *Value == "off")
    {
      return false;
    }
    throw ValidationError("config key '" + Key + "': not a boolean: '" + *Value + "'");
  }

  std::vector<double> KeyValueConfig::getDoubleList(const std::string &Key) const
  {
    std::vector<double> Values;
    const auto Text = getString(Key);
    if (!Text || trim(*Text).empty())
    {
      return Values;
    }
    for (const auto &Part : split(*Text, ','))
    {
      try
      {
        Values.push_back(parseDouble(Part));
      }
      catch (const ValidationError &)
      {
        throw ValidationError("config key '" + Key + "': not a number list: '" + *Text + "'");
      }
    }
    return Values;
  }

  std::vector<std::string> KeyValueConfig::getStringList(const std::string &Key) const
  {
    std::vector<std::string> Values;
    const auto Text = getString(Key);
    if (!Text)
    {
      return Values;
    }
    for (auto &Part : split(*Text, ','))
    {
      if (!Part.empty())
      {
        Values.push_back(std::move(Part));
      }
    }
    return Values;
  }
}
