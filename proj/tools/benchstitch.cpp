#include "cli_app.hpp"

int main(int argc, char** argv) { return benchstitch::cli::run(argc, argv); }
