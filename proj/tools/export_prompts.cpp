// Writes every prompt template to <dir>/<name>.txt.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dpot/prompting.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: export_prompts <dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : dpot::templates::all()) {
        std::ofstream out(dir / (name + ".txt"), std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) {
            std::cerr << "cannot write " << (dir / (name + ".txt")).string() << "\n";
            return 1;
        }
    }
    return 0;
}
