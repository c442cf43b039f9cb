#include "ethtrust/digest.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "ethtrust/errors.hpp"

namespace ethtrust {

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> raw{};
    unsigned int length = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), raw.data(), &length, EVP_sha256(), nullptr))
        throw IoError("SHA-256 computation failed");
    std::string hex(static_cast<std::size_t>(length) * 2, '0');
    static const char* digits = "0123456789abcdef";
    for (unsigned int i = 0; i < length; ++i) {
        hex[2 * i] = digits[raw[i] >> 4];
        hex[2 * i + 1] = digits[raw[i] & 0x0f];
    }
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return sha256_hex(buffer.str());
}

}  // namespace ethtrust
