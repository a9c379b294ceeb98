import { defineConfig } from "vitest/config";

export default defineConfig({
    test: {
        environment: "jsdom",
        include: ["tests/**/*.test.ts"],
        // the integration test boots the real scoring service
        testTimeout: 30000,
        hookTimeout: 30000,
    },
});
