// Copyright 2026 Espada contributors
// SPDX-License-Identifier: Apache-2.0

#include "espada/errors.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace espada {

namespace {

std::mutex g_handler_mutex;
std::function<void(const std::string&)> g_handler;

} // namespace

void log_warning(const std::string& message) {
    std::function<void(const std::string&)> handler;
    {
        std::lock_guard<std::mutex> lock(g_handler_mutex);
        handler = g_handler;
    }
    if (handler) {
        handler(message);
    } else {
        std::cerr << "warning: " << message << "\n";
    }
}

void set_warning_handler(std::function<void(const std::string&)> handler) {
    std::lock_guard<std::mutex> lock(g_handler_mutex);
    g_handler = std::move(handler);
}

} // namespace espada
