#include "cli_app.hpp"

int main(int argc, char** argv) { return adaptrial::cli::run(argc, argv); }
